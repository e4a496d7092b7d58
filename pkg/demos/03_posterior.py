"""
Posterior uncertainty from cell counts
======================================
"""

import numpy as np

from icin import CategoricalSpace, DirichletSpec, ObservedCounts, push_forward, sample_posterior, summarize

rng = np.random.default_rng(11)
space = CategoricalSpace.from_labels({"Ind": ["yes", "no", "dk"], "Att": ["yes", "no", "dk"]})
counts = ObservedCounts(
    space, {m: rng.integers(5, 60, size=space.observed_shape(m)) for m in ["00", "01", "10", "11"]}
)
print(counts)

# the default prior spreads one pseudo-count over all observed cells
draws = sample_posterior(counts, DirichletSpec(), n_draws=4000, seed=1, n_jobs=2)
table = push_forward(draws, {"Ind=yes": {"Ind": "yes"}, "both yes": {"Ind": "yes", "Att": "yes"}})
for row in summarize(table):
    print(row)
