"""
Dropout in a three-wave panel
=============================

With monotone patterns the construction reduces to sequential odds of
dropping out, each depending only on the history already seen.
"""

import numpy as np

from icin import CategoricalSpace, ObservedCounts, build_monotone, sequential_log_odds
from icin.monotone import dropout_records

rng = np.random.default_rng(3)
space = CategoricalSpace.from_labels({"w1": ["a", "b"], "w2": ["a", "b"], "w3": ["a", "b"]})

rows = []
for _ in range(600):
    wave = [rng.choice(["a", "b"]) for _ in range(3)]
    stop = rng.choice([1, 2, 3], p=[0.2, 0.2, 0.6])
    rows.append(wave[:stop] + [""] * (3 - stop))

recs = dropout_records(rows, space)
counts = ObservedCounts.from_records(space, recs)
g = build_monotone(counts.to_distribution())

for t in (2, 3):
    for x in [(0, 0, 0), (1, 0, 0), (1, 1, 0)]:
        print("t=%d history=%s log odds=%.3f" % (t, x[: t - 1], sequential_log_odds(g, t, x)))
