"""Dirichlet-multinomial posterior for the observed-data distribution.

Each posterior draw of the observed cell probabilities is pushed through the
lattice construction, giving draws of any functional of the full-data
distribution.  Draw ``i`` uses its own random stream derived from
``(seed, i)``, so results do not depend on how draws are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .categorical import (
    MISSING,
    CategoricalSpace,
    ObservedDistribution,
    _check_pattern,
    _keepdims,
    _recursion,
    event_mask,
)
from .errors import InvalidArgumentError
from .lattice import Pattern, PatternSet
from .sensitivity import SensitivityFunction

__all__ = [
    "ObservedCounts",
    "DirichletSpec",
    "PosteriorDraws",
    "DrawTable",
    "sample_posterior",
    "push_forward",
    "complete_case_functionals",
    "summarize",
    "draw_rng",
]


class ObservedCounts:
    """Cell counts ``n(x_obs, m)`` keyed like :class:`ObservedDistribution`."""

    def __init__(self, space: CategoricalSpace, counts: Mapping):
        self.space = space
        arrays = {}
        for key, values in counts.items():
            m = _check_pattern(space, key)
            arr = np.asarray(values)
            shape = space.observed_shape(m)
            if arr.size != int(np.prod(shape)):
                raise InvalidArgumentError(f"pattern {m}: expected {shape} counts")
            arr = arr.reshape(shape)
            if np.any(arr < 0) or np.any(arr != np.round(arr)):
                raise InvalidArgumentError(f"pattern {m}: counts must be nonnegative integers")
            arr = arr.astype(np.int64)
            arr.setflags(write=False)
            arrays[m] = arr
        self.patterns = PatternSet(arrays, space.p)
        self.counts = {m: arrays[m] for m in self.patterns}
        if self.total < 1:
            raise InvalidArgumentError("counts must include at least one record")

    @classmethod
    def from_records(cls, space: CategoricalSpace, records, patterns=None) -> "ObservedCounts":
        """Tabulate an ``(n, p)`` array of level indices with :data:`MISSING` blanks.

        The realised patterns form the pattern set unless `patterns` is given.
        The all-observed pattern must be realised or listed.
        """
        records = np.asarray(records, dtype=np.int64)
        if records.ndim != 2 or records.shape[1] != space.p:
            raise InvalidArgumentError(f"records must be an (n, {space.p}) array")
        miss = records == MISSING
        keys = miss.astype(np.int64) @ (1 << np.arange(space.p)[::-1])
        if patterns is None:
            patterns = sorted({Pattern(row) for row in np.unique(miss, axis=0).astype(int)})
        counts = {}
        for m in patterns:
            m = _check_pattern(space, m)
            code = int("".join(map(str, m)), 2)
            rows = records[keys == code][:, list(m.observed)]
            arr = np.zeros(space.observed_shape(m), dtype=np.int64)
            if m.observed:
                np.add.at(arr, tuple(rows.T), 1)
            else:
                arr = np.array(len(rows), dtype=np.int64)
            counts[m] = arr
        return cls(space, counts)

    @property
    def total(self) -> int:
        return int(sum(a.sum() for a in self.counts.values()))

    @property
    def n_cells(self) -> int:
        return sum(a.size for a in self.counts.values())

    def to_distribution(self, tol: float = 1e-12) -> ObservedDistribution:
        """Empirical proportions (zeros kept)."""
        n = self.total
        return ObservedDistribution(self.space, {m: a / n for m, a in self.counts.items()}, tol)

    def posterior_mean(self, prior: "DirichletSpec | None" = None) -> ObservedDistribution:
        """``(n_c + alpha_c) / (N + sum alpha)``, a strictly positive smoothing."""
        alpha = (prior or DirichletSpec()).resolve(self)
        total = self.total + sum(a.sum() for a in alpha.values())
        return ObservedDistribution(
            self.space, {m: (self.counts[m] + alpha[m]) / total for m in self.patterns}
        )

    def __repr__(self) -> str:
        return f"ObservedCounts(levels={self.space.levels}, N={self.total})"


@dataclass(frozen=True)
class DirichletSpec:
    """Dirichlet prior over the observed cells.

    `concentration` is a positive scalar applied to every cell, a mapping from
    pattern to a per-cell array, or None for the symmetric default ``1 / C``
    with ``C`` the number of observed cells.
    """

    concentration: float | Mapping | None = None

    def __post_init__(self):
        c = self.concentration
        if c is None:
            return
        values = c.values() if isinstance(c, Mapping) else [c]
        for v in values:
            if not np.all(np.asarray(v, dtype=float) > 0):
                raise InvalidArgumentError("Dirichlet concentrations must be positive")

    def resolve(self, counts: ObservedCounts) -> dict:
        c = self.concentration
        if c is None:
            c = 1.0 / counts.n_cells
        if isinstance(c, Mapping):
            out = {}
            for m in counts.patterns:
                key = m if m in c else str(m)
                if key not in c:
                    raise InvalidArgumentError(f"no concentration given for pattern {m}")
                out[m] = np.broadcast_to(np.asarray(c[key], dtype=float), counts.counts[m].shape)
            return out
        return {m: np.full(a.shape, float(c)) for m, a in counts.counts.items()}


def draw_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for draw `index` under `seed`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _log_dirichlet(shape: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # log Gamma(a) = log Gamma(a + 1) + log(U) / a for a < 1, exact and underflow-free
    small = shape < 1
    log_g = np.log(rng.standard_gamma(np.where(small, shape + 1.0, shape)))
    u = 1.0 - rng.random(shape.size)
    log_g = log_g + np.where(small, np.log(u) / shape, 0.0)
    return log_g - logsumexp(log_g)


class PosteriorDraws:
    """Draws of the observed-data distribution, stored as batched log masses.

    ``log_mass[m]`` has shape ``(n_draws, *observed_shape(m))``.  Indexing
    returns the draw as an :class:`ObservedDistribution`.
    """

    def __init__(self, space, patterns, log_mass, seed):
        self.space = space
        self.patterns = patterns
        self.log_mass = log_mass
        self.seed = seed

    @property
    def n_draws(self) -> int:
        return next(iter(self.log_mass.values())).shape[0]

    def __len__(self) -> int:
        return self.n_draws

    def __getitem__(self, i) -> ObservedDistribution:
        return ObservedDistribution(
            self.space, {m: np.exp(a[i]) for m, a in self.log_mass.items()}, tol=1e-12
        )

    def __iter__(self):
        return (self[i] for i in range(self.n_draws))

    def cell_matrix(self) -> np.ndarray:
        """Probabilities as ``(n_draws, C)`` in pattern-then-cell order."""
        return np.exp(
            np.concatenate([a.reshape(self.n_draws, -1) for a in self.log_mass.values()], axis=1)
        )

    @classmethod
    def from_distributions(cls, dists: Sequence[ObservedDistribution], seed=None) -> "PosteriorDraws":
        first = dists[0]
        log_mass = {
            m: np.log(np.stack([d.mass[m] for d in dists])) for m in first.patterns
        }
        return cls(first.space, first.patterns, log_mass, seed)


def sample_posterior(
    counts: ObservedCounts,
    prior: DirichletSpec | None = None,
    n_draws: int = 5000,
    seed: int = 0,
    n_jobs: int = 1,
) -> PosteriorDraws:
    """Draw observed-data distributions from ``Dirichlet(counts + alpha)``.

    Each draw normalises independent ``Gamma(n_c + alpha_c, 1)`` variates,
    generated in log space so tiny shapes cannot underflow to an exact zero.
    The output is identical for any `n_jobs`.
    """
    if n_draws < 1:
        raise InvalidArgumentError("n_draws must be at least 1")
    alpha = (prior or DirichletSpec()).resolve(counts)
    shape = np.concatenate(
        [(counts.counts[m] + alpha[m]).reshape(-1) for m in counts.patterns]
    ).astype(float)

    def work(idx):
        return [_log_dirichlet(shape, draw_rng(seed, i)) for i in idx]

    chunks = np.array_split(np.arange(n_draws), max(1, min(n_jobs, n_draws)))
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    logp = np.array([row for part in parts for row in part])
    log_mass, start = {}, 0
    for m in counts.patterns:
        size = counts.counts[m].size
        log_mass[m] = logp[:, start:start + size].reshape((n_draws,) + counts.counts[m].shape)
        start += size
    return PosteriorDraws(counts.space, counts.patterns, log_mass, seed)


@dataclass
class DrawTable:
    """Per-draw functional values, ``values[i, k]`` for draw i and functional k."""

    names: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, name) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def rows(self):
        """Long format ``(draw, functional, value)``."""
        for i in range(self.values.shape[0]):
            for k, name in enumerate(self.names):
                yield i, name, float(self.values[i, k])


def push_forward(
    draws: PosteriorDraws,
    functionals: Mapping[str, object],
    xi: SensitivityFunction | None = None,
    chunk: int = 1024,
) -> DrawTable:
    """Evaluate functionals of the (optionally tilted) full-data distribution per draw."""
    space = draws.space
    names = tuple(functionals)
    masks = np.stack([event_mask(space, functionals[n]) for n in names]).astype(float)
    offsets = xi.offsets(draws.patterns) if xi is not None else None
    out = np.empty((draws.n_draws, len(names)))
    for start in range(0, draws.n_draws, chunk):
        stop = min(start + chunk, draws.n_draws)
        log_f = {m: _keepdims(space, m, a[start:stop], batch=1) for m, a in draws.log_mass.items()}
        _, log_g = _recursion(space, draws.patterns, log_f, offsets, batch=1)
        marginal = sum(
            np.broadcast_to(np.exp(lg), (stop - start,) + space.shape) for lg in log_g.values()
        )
        out[start:stop] = marginal.reshape(stop - start, -1) @ masks.reshape(len(names), -1).T
    return DrawTable(names, out)


def complete_case_functionals(draws: PosteriorDraws, functionals: Mapping[str, object]) -> DrawTable:
    """Functionals of ``pr(X | M = 0_p)`` per draw, the ignorable-style contrast."""
    space = draws.space
    names = tuple(functionals)
    masks = np.stack([event_mask(space, functionals[n]) for n in names]).astype(float)
    cc = np.exp(draws.log_mass[Pattern.zeros(space.p)]).reshape(draws.n_draws, -1)
    cc = cc / cc.sum(axis=1, keepdims=True)
    return DrawTable(names, cc @ masks.reshape(len(names), -1).T)


def summarize(table: DrawTable, levels: Sequence[float] = (0.025, 0.5, 0.975)) -> list[dict]:
    """Mean and type-7 quantiles of each functional column."""
    if table.values.size == 0:
        raise InvalidArgumentError("cannot summarise an empty table")
    qs = np.quantile(table.values, levels, axis=0, method="linear")
    rows = []
    for k, name in enumerate(table.names):
        row = {"functional": name, "mean": float(table.values[:, k].mean())}
        row.update({f"q{lev:g}": float(qs[i, k]) for i, lev in enumerate(levels)})
        rows.append(row)
    return rows
