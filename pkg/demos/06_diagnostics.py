"""
Checking an alternative identifying assumption
==============================================

If X1 is independent of M2 given X2, the pattern-01 distribution of X1 must
be a mixture of the complete-case conditionals.  When it is not, the
closed-form estimator breaks down while the lattice construction still runs.
"""

import numpy as np

from icin import (
    CategoricalSpace,
    InfeasibleError,
    ObservedDistribution,
    build_full_data,
    convex_feasibility,
    hausman_wise_closed_form,
)

space = CategoricalSpace((2, 2))
f00 = np.array([[0.09, 0.12], [0.21, 0.18]])
f01 = np.array([0.24, 0.16])
f = ObservedDistribution(space, {"00": f00, "01": f01})

report = convex_feasibility(f, j=1, k=0)
print(report.overall, "distance to hull:", report.worst_violation)

try:
    hausman_wise_closed_form(f)
except InfeasibleError as exc:
    print("closed form fails:", exc)

g = build_full_data(f)
print("lattice construction, min mass:", g.table().min())
