"""
Tilting the model away from the identifying assumption
======================================================

Offsets xi shift the log odds of nonresponse by a fixed amount per level.
A small grid shows how far the Ind marginal can move.
"""

import numpy as np

from icin import (
    CategoricalSpace,
    ObservedDistribution,
    SensitivityFunction,
    SensitivityGrid,
    build_full_data_xi,
    conditional_log_odds_ratio,
    run_grid,
)

rng = np.random.default_rng(5)
space = CategoricalSpace.from_labels({"Ind": ["yes", "no"], "Att": ["yes", "no"]})
raw = {m: rng.uniform(0.5, 1.5, size=space.observed_shape(m)) for m in ["00", "01", "10", "11"]}
total = sum(a.sum() for a in raw.values())
f = ObservedDistribution(space, {m: a / total for m, a in raw.items()})

xi = SensitivityFunction.from_offsets(space, {"Ind": {"no": 1.0}})
g = build_full_data_xi(f, xi)
# the offset shows up as a log odds ratio of exactly 1
print(conditional_log_odds_ratio(g, 0, (1, 0), "yes"))

grid = SensitivityGrid.cross(space, {"Ind": ("no", np.linspace(-2, 2, 5)), "Att": ("no", [-1, 0, 1])})
for row in run_grid(f, grid, {"Ind=yes": {"Ind": "yes"}}):
    print(row["label"], round(row["value"], 4))
