"""
Two continuous measurements with item nonresponse
=================================================

Kernel density estimates per pattern are glued together on a grid.  The
missingness curves show how the chance of a missing second measurement
varies with the first.
"""

import numpy as np

from icin import GridSpec, WeightedSample, fit_bivariate, missingness_curves, pattern_functionals
from icin.continuous import summary_table

rng = np.random.default_rng(0)
z = rng.multivariate_normal([170, 168], [[60, 50], [50, 60]], size=1500)
w = rng.uniform(0.5, 2.0, size=1500)

# taller people skip the second measurement more often
drop2 = rng.uniform(size=1500) < 1 / (1 + np.exp(-(z[:, 0] - 175) / 4))
drop1 = rng.uniform(size=1500) < 0.1
x1 = np.where(drop1, np.nan, z[:, 0])
x2 = np.where(drop2, np.nan, z[:, 1])

sample = WeightedSample(x1, x2, w)
model = fit_bivariate(sample, GridSpec((130, 130), (210, 210), (128, 128)))

for row in summary_table(model):
    print(row)

print(pattern_functionals(model, "01"))
pts = np.linspace(160, 180, 5)
print(np.round(missingness_curves(model, 2, pts), 3))
