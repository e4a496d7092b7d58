"""Bivariate continuous ICIN model with weighted Gaussian kernel density estimates.

With two continuous items and all four patterns realised, the lattice
construction has a closed form.  Writing ``f_m`` for the density of the items
observed under pattern ``m``:

    g_00(x1, x2) = f_00(x1, x2)
    g_01(x1, x2) = f_00(x1, x2) f_01(x1) / f_00(x1)
    g_10(x1, x2) = f_00(x1, x2) f_10(x2) / f_00(x2)
    g_11(x1, x2) ∝ f_00(x1, x2) f_01(x1) f_10(x2) / (f_00(x1) f_00(x2))

where ``f_00(x1)`` and ``f_00(x2)`` are the marginals of the complete-case
density.  Each ``f_m`` is a weighted product-Gaussian KDE; expectations and
the ``g_11`` normalising constant use trapezoid quadrature on a tensor grid,
with every density handled in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateSampleError,
    ExtrapolationError,
    FitError,
    InvalidArgumentError,
    QuadratureError,
)
from .lattice import Pattern

__all__ = [
    "PATTERNS",
    "WeightedSample",
    "KdeDensity",
    "GridSpec",
    "BivariateIcin",
    "pattern_proportions",
    "weighted_quantile",
    "silverman_rule",
    "silverman_bandwidth",
    "fit_kde",
    "kde_eval",
    "grid_mass",
    "fit_bivariate",
    "pattern_functionals",
    "missingness_curves",
    "summary_table",
]

PATTERNS = tuple(Pattern(s) for s in ("00", "01", "10", "11"))
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)
_CHUNK = 4_000_000  # kernel evaluations held in memory at once


@dataclass
class WeightedSample:
    """Two continuous items per record, NaN marking a missing value, with survey weights."""

    x1: np.ndarray
    x2: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float).reshape(-1)
        self.x2 = np.asarray(self.x2, dtype=float).reshape(-1)
        n = self.x1.size
        if self.x2.size != n:
            raise InvalidArgumentError("x1 and x2 must have the same length")
        if n == 0:
            raise InvalidArgumentError("empty sample")
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != n:
            raise InvalidArgumentError("one weight per record")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidArgumentError("weights must be finite and positive")
        self.weights = w
        for arr in (self.x1, self.x2):
            if np.any(np.isinf(arr)):
                raise InvalidArgumentError("values must be finite or NaN")

    def __len__(self) -> int:
        return self.x1.size

    @property
    def bits(self) -> np.ndarray:
        """``(n, 2)`` missingness indicators."""
        return np.stack([np.isnan(self.x1), np.isnan(self.x2)], axis=1).astype(int)

    def mask(self, m) -> np.ndarray:
        m = Pattern(m)
        b = self.bits
        return (b[:, 0] == m[0]) & (b[:, 1] == m[1])

    def subset(self, keep: np.ndarray) -> "WeightedSample":
        return WeightedSample(self.x1[keep], self.x2[keep], self.weights[keep])


def pattern_proportions(sample: WeightedSample) -> dict[Pattern, float]:
    """Weighted share of records in each of the four patterns."""
    if len(sample) == 0:
        raise InvalidArgumentError("empty sample")
    total = sample.weights.sum()
    return {m: float(sample.weights[sample.mask(m)].sum() / total) for m in PATTERNS}


# --------------------------------------------------------------------------
# Bandwidths and kernel density estimates


def weighted_quantile(values, weights, q):
    """Quantiles of the weighted empirical distribution (inverse CDF)."""
    return np.quantile(np.asarray(values, float), q, weights=np.asarray(weights, float), method="inverted_cdf")


def silverman_rule(sigma: float, iqr: float, n_eff: float) -> float:
    """``0.9 * min(sigma, iqr / 1.34) * n_eff ** (-1/5)``; falls back to sigma when the IQR is 0."""
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return 0.9 * spread * n_eff ** -0.2


def silverman_bandwidth(values, weights=None) -> float:
    """Silverman's rule of thumb with weighted moments and Kish effective size."""
    x = np.asarray(values, dtype=float).reshape(-1)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateSampleError("bandwidth needs at least two distinct values")
    w_sum = w.sum()
    mean = np.dot(w, x) / w_sum
    sigma = np.sqrt(np.dot(w, (x - mean) ** 2) / w_sum)
    q25, q75 = weighted_quantile(x, w, [0.25, 0.75])
    n_eff = w_sum**2 / np.dot(w, w)
    return silverman_rule(sigma, q75 - q25, n_eff)


@dataclass(frozen=True)
class KdeDensity:
    """Weighted Gaussian product-kernel density.

    ``centers`` has shape ``(n, d)``, ``weights`` sums to one and
    ``bandwidths`` has one entry per dimension.
    """

    centers: np.ndarray
    weights: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        h = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        if w.size != c.shape[0] or h.size != c.shape[1]:
            raise InvalidArgumentError("inconsistent KDE dimensions")
        if np.any(h <= 0) or not np.all(np.isfinite(h)):
            raise InvalidArgumentError("bandwidths must be positive")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise InvalidArgumentError("KDE weights must be nonnegative and sum to 1")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bandwidths", h)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def marginal(self, axis: int) -> "KdeDensity":
        return KdeDensity(self.centers[:, axis], self.weights, self.bandwidths[axis : axis + 1])

    def _log_kernel(self, axis: int, x: np.ndarray, rows=slice(None)) -> np.ndarray:
        """``log phi_h(x_a - c_i)`` as ``(n, len(x))`` for centres `rows`."""
        h = self.bandwidths[axis]
        z = (x[None, :] - self.centers[rows, axis, None]) / h
        return -0.5 * z * z - _LOG_SQRT_2PI - np.log(h)

    def logpdf(self, points) -> np.ndarray:
        """Log density at ``(N, d)`` points (or ``(N,)`` in one dimension)."""
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InvalidArgumentError(f"points must have {self.dim} coordinates")
        log_w = np.log(self.weights)[:, None]
        step = max(1, _CHUNK // max(1, self.centers.shape[0]))
        out = np.empty(pts.shape[0])
        for s in range(0, pts.shape[0], step):
            block = pts[s : s + step]
            acc = log_w + sum(self._log_kernel(a, block[:, a]) for a in range(self.dim))
            out[s : s + step] = logsumexp(acc, axis=0)
        return out

    def pdf(self, points) -> np.ndarray:
        return np.exp(self.logpdf(points))

    def log_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        """Log density on the tensor product of 1 or 2 axis vectors."""
        if len(axes) != self.dim:
            raise InvalidArgumentError(f"need {self.dim} axis vectors")
        if self.dim == 1:
            return self.logpdf(axes[0])
        a1, a2 = (np.asarray(a, dtype=float) for a in axes)
        n = self.centers.shape[0]
        step = max(1, _CHUNK // max(a1.size, a2.size))
        log_w = np.log(self.weights)
        # column-wise maxima keep the matrix product in range
        max1 = np.full(a1.size, -np.inf)
        max2 = np.full(a2.size, -np.inf)
        for s in range(0, n, step):
            sl = slice(s, s + step)
            max1 = np.maximum(max1, (self._log_kernel(0, a1, sl) + log_w[sl, None]).max(axis=0))
            max2 = np.maximum(max2, self._log_kernel(1, a2, sl).max(axis=0))
        total = np.zeros((a1.size, a2.size))
        for s in range(0, n, step):
            sl = slice(s, s + step)
            k1 = np.exp(self._log_kernel(0, a1, sl) + log_w[sl, None] - max1[None, :])
            k2 = np.exp(self._log_kernel(1, a2, sl) - max2[None, :])
            total += k1.T @ k2
        with np.errstate(divide="ignore"):
            return np.log(total) + max1[:, None] + max2[None, :]

    def __call__(self, point):
        return kde_eval(self, point)


def fit_kde(values, weights=None, bandwidths=None) -> KdeDensity:
    """KDE with Silverman bandwidths per coordinate unless `bandwidths` is given."""
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    if bandwidths is None:
        bandwidths = [silverman_bandwidth(x[:, a], w) for a in range(x.shape[1])]
    return KdeDensity(x, w / w.sum(), np.asarray(bandwidths, dtype=float))


def kde_eval(density: KdeDensity, point) -> float:
    """Density at a single point."""
    return float(density.pdf(np.asarray(point, dtype=float).reshape(1, -1))[0])


# --------------------------------------------------------------------------
# Quadrature grid


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid with per-dimension bounds and point counts."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...] = (256, 256)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if len(n) == 1 and len(lo) > 1:
            n = n * len(lo)
        if not (len(lo) == len(hi) == len(n)):
            raise InvalidArgumentError("grid bounds and counts disagree in dimension")
        if any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgumentError("grid needs lo < hi in every dimension")
        if any(k < 32 for k in n):
            raise InvalidArgumentError("grid needs at least 32 points per dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, k) for a, b, k in zip(self.lo, self.hi, self.n)]

    def weights(self, axis: int) -> np.ndarray:
        """Trapezoid weights along one axis."""
        x = self.axes[axis]
        w = np.full(x.size, x[1] - x[0])
        w[0] = w[-1] = 0.5 * (x[1] - x[0])
        return w

    def contains(self, axis: int, points) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all((pts >= self.lo[axis]) & (pts <= self.hi[axis])))

    @classmethod
    def padded(cls, density: KdeDensity, pad: float = 6.0, n: int = 256) -> "GridSpec":
        """Grid over the centres' range padded by ``pad`` bandwidths."""
        c, h = density.centers, density.bandwidths
        return cls(tuple(c.min(axis=0) - pad * h), tuple(c.max(axis=0) + pad * h), (n,) * density.dim)


def grid_mass(density: KdeDensity, grid: GridSpec | None = None) -> float:
    """Trapezoid integral of a KDE over a grid (default: padded by 6 bandwidths)."""
    grid = grid or GridSpec.padded(density)
    vals = np.exp(density.log_grid(grid.axes))
    if density.dim == 1:
        return float(vals @ grid.weights(0))
    return float(grid.weights(0) @ vals @ grid.weights(1))


# --------------------------------------------------------------------------
# Bivariate ICIN model


@dataclass
class BivariateIcin:
    """Fitted densities, pattern shares and the ``g_11`` normaliser.

    ``f01`` is the density of ``x1`` among records missing only ``x2``;
    ``f10`` is the density of ``x2`` among records missing only ``x1``.
    Either may be None when its pattern has no records.
    """

    f00: KdeDensity
    f01: KdeDensity | None
    f10: KdeDensity | None
    pi: dict
    grid: GridSpec
    log_z11: float | None = None
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        pi = {Pattern(m): float(v) for m, v in self.pi.items()}
        for m in PATTERNS:
            pi.setdefault(m, 0.0)
        if any(v < 0 for v in pi.values()) or abs(sum(pi.values()) - 1) > 1e-9:
            raise InvalidArgumentError("pattern shares must be nonnegative and sum to 1")
        self.pi = pi
        if self.f00.dim != 2:
            raise InvalidArgumentError("f00 must be two-dimensional")
        if pi[PATTERNS[1]] > 0 and self.f01 is None:
            raise FitError("pattern 01 has positive share but no density for x1")
        if pi[PATTERNS[2]] > 0 and self.f10 is None:
            raise FitError("pattern 10 has positive share but no density for x2")
        if pi[PATTERNS[3]] > 0:
            if self.f01 is None or self.f10 is None:
                raise FitError("pattern 11 needs densities for patterns 01 and 10")
            if self.log_z11 is None:
                self.log_z11 = self._log_normaliser()
        if self.log_z11 is not None and not np.isfinite(self.log_z11):
            raise QuadratureError("g_11 normalising constant is not finite")

    def _f00_log_grid(self, a1, a2) -> np.ndarray:
        g1, g2 = self.grid.axes
        if a1.shape == g1.shape and a2.shape == g2.shape and np.array_equal(a1, g1) and np.array_equal(a2, g2):
            if getattr(self, "_cache", None) is None:
                self._cache = self.f00.log_grid([g1, g2])
            return self._cache
        return self.f00.log_grid([a1, a2])

    def _log_unnormalised(self, m: Pattern, a1, a2) -> np.ndarray:
        a1 = np.asarray(a1, dtype=float).reshape(-1)
        a2 = np.asarray(a2, dtype=float).reshape(-1)
        out = self._f00_log_grid(a1, a2)
        if m[1]:  # x2 missing: multiply by f01(x1) / f00(x1)
            out = out + (self.f01.logpdf(a1) - self.f00.marginal(0).logpdf(a1))[:, None]
        if m[0]:
            out = out + (self.f10.logpdf(a2) - self.f00.marginal(1).logpdf(a2))[None, :]
        if np.any(np.isnan(out)) or np.any(out == np.inf):
            raise QuadratureError(
                f"g_{m} integrand is not finite on the grid; use a tighter grid"
            )
        return out

    def _log_normaliser(self) -> float:
        a1, a2 = self.grid.axes
        lg = self._log_unnormalised(PATTERNS[3], a1, a2)
        w = np.log(self.grid.weights(0))[:, None] + np.log(self.grid.weights(1))[None, :]
        z = logsumexp(lg + w)
        if not np.isfinite(z):
            raise QuadratureError("g_11 normalising integral is not finite; use a tighter grid")
        return float(z)

    def log_density(self, m, a1, a2) -> np.ndarray:
        """``log g_m`` on the tensor product of axis vectors `a1` and `a2`."""
        m = Pattern(m)
        if self.pi[m] == 0:
            raise InvalidArgumentError(f"pattern {m} has zero share; g_{m} is undefined")
        out = self._log_unnormalised(m, a1, a2)
        if m == PATTERNS[3]:
            out = out - self.log_z11
        return out

    def density(self, m, a1, a2) -> np.ndarray:
        return np.exp(self.log_density(m, a1, a2))

    def density_at(self, m, x1, x2) -> float:
        return float(self.density(m, [x1], [x2])[0, 0])

    def grid_density(self, m) -> np.ndarray:
        a1, a2 = self.grid.axes
        return self.density(m, a1, a2)

    def grid_mass(self, m) -> float:
        return float(self.grid.weights(0) @ self.grid_density(m) @ self.grid.weights(1))

    @property
    def realised(self) -> list[Pattern]:
        return [m for m in PATTERNS if self.pi[m] > 0]


def _default_grid(sample: WeightedSample, densities, n: int = 256, pad: float = 4.0) -> GridSpec:
    lo, hi = [], []
    for axis, values in enumerate((sample.x1, sample.x2)):
        v = values[~np.isnan(values)]
        hs = [d.bandwidths[axis if d.dim == 2 else 0] for d, ax in densities if ax in (axis, None)]
        h = max(hs)
        lo.append(v.min() - pad * h)
        hi.append(v.max() + pad * h)
    return GridSpec(tuple(lo), tuple(hi), (n, n))


def fit_bivariate(sample: WeightedSample, grid: GridSpec | None = None) -> BivariateIcin:
    """Fit the three KDEs and the ``g_11`` normaliser.

    Each KDE weights records by their survey weight and uses Silverman
    bandwidths.  The default grid spans the observed data padded by four of
    the largest bandwidths on each axis, with 256 points per axis.
    """
    pi = pattern_proportions(sample)
    counts = {m: int(sample.mask(m).sum()) for m in PATTERNS}
    if counts[PATTERNS[0]] < 2:
        raise FitError("pattern 00 needs at least two complete records")

    def fit(m, cols):
        s = sample.subset(sample.mask(m))
        data = np.stack([(s.x1, s.x2)[c] for c in cols], axis=1)
        if counts[m] < 2:
            raise FitError(f"pattern {m} has {counts[m]} record(s); at least two are needed")
        try:
            return fit_kde(data, s.weights)
        except DegenerateSampleError as exc:
            raise FitError(f"pattern {m}: {exc}") from exc

    f00 = fit(PATTERNS[0], (0, 1))
    f01 = fit(PATTERNS[1], (0,)) if counts[PATTERNS[1]] else None
    f10 = fit(PATTERNS[2], (1,)) if counts[PATTERNS[2]] else None
    if grid is None:
        dens = [(f00, None)] + [(d, ax) for d, ax in ((f01, 0), (f10, 1)) if d is not None]
        grid = _default_grid(sample, dens)
    return BivariateIcin(f00, f01, f10, pi, grid, counts=counts)


def pattern_functionals(model: BivariateIcin, m) -> dict[str, float]:
    """``pr(X1 > X2 | m)``, the two means and the correlation under ``g_m``.

    Grid points on the diagonal count one half towards ``X1 > X2``.
    """
    m = Pattern(m)
    a1, a2 = model.grid.axes
    w = model.grid.weights(0)[:, None] * model.grid.weights(1)[None, :] * model.grid_density(m)
    w = w / w.sum()
    x1, x2 = a1[:, None], a2[None, :]
    above = (np.sign(x1 - x2) + 1) / 2
    m1, m2 = float((w * x1).sum()), float((w * x2).sum())
    v1 = float((w * (x1 - m1) ** 2).sum())
    v2 = float((w * (x2 - m2) ** 2).sum())
    cov = float((w * (x1 - m1) * (x2 - m2)).sum())
    return {
        "pr_x1_gt_x2": float((w * above).sum()),
        "mean_x1": m1,
        "mean_x2": m2,
        "corr": float(cov / np.sqrt(v1 * v2)),
    }


def missingness_curves(model: BivariateIcin, axis: int, points) -> np.ndarray:
    """``pr(M_axis = 1 | X_axis = x)`` at each point (axis is 1 or 2).

    Each ``g_m`` is integrated over the other item on the grid, then the
    patterns missing the chosen item are weighed against all patterns.
    """
    if axis not in (1, 2):
        raise InvalidArgumentError("axis must be 1 or 2")
    pts = np.asarray(points, dtype=float).reshape(-1)
    a = axis - 1
    if not model.grid.contains(a, pts):
        raise ExtrapolationError(f"curve points outside the grid on axis {axis}")
    other = model.grid.axes[1 - a]
    w_other = model.grid.weights(1 - a)
    num = np.zeros(pts.size)
    den = np.zeros(pts.size)
    for m in model.realised:
        if a == 0:
            marg = model.density(m, pts, other) @ w_other
        else:
            marg = w_other @ model.density(m, other, pts)
        contrib = model.pi[m] * marg
        den += contrib
        if m[a]:
            num += contrib
    with np.errstate(invalid="ignore"):
        out = num / den
    if np.any(~np.isfinite(out)):
        raise QuadratureError("curve denominator vanished; points lie where no pattern has mass")
    return out


def summary_table(model: BivariateIcin) -> list[dict]:
    """One row per realised pattern: count, share and :func:`pattern_functionals`."""
    rows = []
    for m in model.realised:
        row = {"pattern": str(m), "n": model.counts.get(m, 0), "pi": model.pi[m]}
        row.update(pattern_functionals(model, m))
        rows.append(row)
    return rows
