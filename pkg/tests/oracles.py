"""Independent reference computations used as test oracles.

These deliberately avoid the package's array machinery: plain dictionaries,
explicit loops over cells and ``math`` functions only.
"""

import math
from itertools import product

import numpy as np

from icin import CategoricalSpace, ObservedDistribution, Pattern


def below(a, b):
    return all(y >= x for x, y in zip(a, b))


def brute_force_full_data(levels, masses, patterns):
    """Lattice recursion by enumeration.

    `masses` maps ``(pattern_tuple, observed_cell_tuple)`` to a probability.
    Returns ``(eta, g)`` dictionaries keyed by ``(pattern, observed cell)`` and
    ``(full cell, pattern)``.
    """
    patterns = sorted((tuple(m) for m in patterns), key=lambda m: (sum(m), m))
    p = len(levels)
    eta = {}

    def obs(m, x):
        return tuple(x[j] for j in range(p) if not m[j])

    for m in patterns:
        obs_idx = [j for j in range(p) if not m[j]]
        mis_idx = [j for j in range(p) if m[j]]
        preds = [s for s in patterns if s != m and below(s, m)]
        for xo in product(*(range(levels[j]) for j in obs_idx)):
            total = 0.0
            for xm in product(*(range(levels[j]) for j in mis_idx)):
                x = [0] * p
                for j, v in zip(obs_idx, xo):
                    x[j] = v
                for j, v in zip(mis_idx, xm):
                    x[j] = v
                total += math.exp(sum(eta[(s, obs(s, x))] for s in preds))
            eta[(m, xo)] = math.log(masses[(m, xo)]) - math.log(total)
    g = {}
    for m in patterns:
        for x in product(*(range(k) for k in levels)):
            g[(x, m)] = math.exp(sum(eta[(s, obs(s, x))] for s in patterns if below(s, m)))
    return eta, g


def observed_to_dict(observed):
    out = {}
    for m, cell, value in observed.items():
        out[(tuple(m), tuple(cell))] = value
    return out


def closed_form_p2(f00, f01, f10, f11):
    """Full-data masses for two categorical items with all four patterns.

    ``g01 = f00 f01(x1) / f00(x1)``, ``g10 = f00 f10(x2) / f00(x2)`` and
    ``g11`` proportional to ``f00 f01(x1) f10(x2) / (f00(x1) f00(x2))`` with
    total mass ``f11``.
    """
    f00 = np.asarray(f00, float)
    f01 = np.asarray(f01, float)
    f10 = np.asarray(f10, float)
    r1 = f00.sum(axis=1)
    r2 = f00.sum(axis=0)
    g01 = f00 * (f01 / r1)[:, None]
    g10 = f00 * (f10 / r2)[None, :]
    raw = f00 * (f01 / r1)[:, None] * (f10 / r2)[None, :]
    g11 = raw * float(f11) / raw.sum()
    return {"00": f00, "01": g01, "10": g10, "11": g11}


def random_observed(rng, levels, patterns, floor=1e-3):
    """Strictly positive observed distribution over the given patterns."""
    space = CategoricalSpace(tuple(levels))
    raw = {}
    for m in patterns:
        m = Pattern(m)
        raw[m] = rng.gamma(1.0, size=space.observed_shape(m)) + floor
    total = sum(a.sum() for a in raw.values())
    return ObservedDistribution(space, {m: a / total for m, a in raw.items()})


def random_pattern_set(rng, p):
    """Random subset of {0,1}^p containing the all-observed pattern."""
    all_patterns = [m for m in product((0, 1), repeat=p) if any(m)]
    keep = [m for m in all_patterns if rng.random() < 0.6]
    return [(0,) * p] + keep


def random_corpus(n, seed=20240521, ps=(2, 3, 4), ks=(2, 3)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p = int(rng.choice(ps))
        levels = [int(rng.choice(ks)) for _ in range(p)]
        out.append(random_observed(rng, levels, random_pattern_set(rng, p)))
    return out
