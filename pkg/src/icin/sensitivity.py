"""Departures from ICIN indexed by item-by-own-indicator log odds ratios.

An additive sensitivity function ``xi(x, m) = sum_j xi_j(x_j, m_j)`` is added
inside the exponent of the lattice construction.  The recursion re-normalises
so that the observed-data distribution is unchanged for every finite ``xi``,
while ``xi_j(x_j, 1)`` becomes the log odds ratio of nonresponse on item j
when ``X_j = x_j`` versus the reference level.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .categorical import (
    CategoricalSpace,
    FullDataDistribution,
    ObservedDistribution,
    _assemble,
    _check_pattern,
    _log_f,
    _recursion,
    event_probability,
)
from .errors import IcinError, InvalidArgumentError, UndefinedConditionalError
from .lattice import Pattern, sibling_pattern

__all__ = [
    "SensitivityFunction",
    "SensitivityGrid",
    "build_full_data_xi",
    "conditional_log_odds_ratio",
    "xi_log_odds_ratio",
    "run_grid",
]


class SensitivityFunction:
    """Additive offsets ``xi_j(x_j, 1)`` anchored at a reference cell.

    Parameters
    ----------
    space : CategoricalSpace
    tables : sequence of arrays
        ``tables[j][k]`` is the offset when item j is missing and takes level
        k.  Offsets for observed items are identically zero.
    reference : sequence of int
        Reference level per item; its offset must be zero.
    """

    def __init__(self, space: CategoricalSpace, tables, reference=None):
        if callable(tables):
            raise InvalidArgumentError(
                "only additive sensitivity functions sum_j xi_j(x_j, m_j) are "
                "supported; general xi(x, m) is hard to interpret and is rejected"
            )
        self.space = space
        if reference is None:
            reference = (0,) * space.p
        self.reference = tuple(space.level_index(j, r) for j, r in enumerate(reference))
        if len(tables) != space.p:
            raise InvalidArgumentError(f"need one offset table per item ({space.p})")
        arrs = []
        for j, t in enumerate(tables):
            a = np.array(t, dtype=float).reshape(-1)
            if a.shape != (space.levels[j],):
                raise InvalidArgumentError(
                    f"offset table for item {space.names[j]} needs {space.levels[j]} entries"
                )
            if not np.all(np.isfinite(a)):
                raise InvalidArgumentError("sensitivity offsets must be finite")
            if a[self.reference[j]] != 0.0:
                raise InvalidArgumentError(
                    f"offset at the reference level of item {space.names[j]} must be 0"
                )
            a.setflags(write=False)
            arrs.append(a)
        self.tables = tuple(arrs)

    @classmethod
    def zero(cls, space: CategoricalSpace, reference=None) -> "SensitivityFunction":
        return cls(space, [np.zeros(k) for k in space.levels], reference)

    @classmethod
    def from_offsets(
        cls, space: CategoricalSpace, offsets: Mapping, reference=None
    ) -> "SensitivityFunction":
        """Build from ``{item: {level: offset}}``; items and levels by name or index.

        `reference` is a mapping or sequence of reference levels (default:
        first level of each item).
        """
        if isinstance(reference, Mapping):
            ref = [0] * space.p
            for item, level in reference.items():
                j = space.item_index(item)
                ref[j] = space.level_index(j, level)
            reference = ref
        tables = [np.zeros(k) for k in space.levels]
        for item, per_level in offsets.items():
            j = space.item_index(item)
            for level, value in per_level.items():
                tables[j][space.level_index(j, level)] = float(value)
        return cls(space, tables, reference)

    def is_zero(self) -> bool:
        return all(not np.any(t) for t in self.tables)

    def __call__(self, x, m) -> float:
        """``xi(x, m)``."""
        m = _check_pattern(self.space, m)
        return float(sum(self.tables[j][x[j]] for j in m.missing))

    def offset_array(self, m: Pattern) -> np.ndarray:
        """``xi(., m)`` as a broadcastable array over full cells."""
        space = self.space
        out = np.zeros((1,) * space.p)
        for j in m.missing:
            shape = [1] * space.p
            shape[j] = space.levels[j]
            out = out + self.tables[j].reshape(shape)
        return out

    def offsets(self, patterns) -> dict:
        return {m: (self.offset_array(m) if m.n_missing else None) for m in patterns}

    def __repr__(self) -> str:
        return f"SensitivityFunction({[t.tolist() for t in self.tables]}, reference={self.reference})"


def build_full_data_xi(observed: ObservedDistribution, xi: SensitivityFunction) -> FullDataDistribution:
    """Full-data distribution tilted by `xi` with the observed data held fixed."""
    if xi.space.levels != observed.space.levels:
        raise InvalidArgumentError("sensitivity function and data have different spaces")
    log_f = _log_f(observed)
    offsets = xi.offsets(observed.patterns)
    eta, log_g = _recursion(observed.space, observed.patterns, log_f, offsets)
    return _assemble(observed, eta, log_g, offsets, xi)


def _siblings(g, j, m):
    space = g.space
    if m is None:
        m = Pattern.zeros(space.p)
    bits = tuple(m)
    if len(bits) == space.p - 1:
        bits = bits[:j] + (0,) + bits[j:]
    m = _check_pattern(space, bits)
    return sibling_pattern(m, j, 1), sibling_pattern(m, j, 0)


def conditional_log_odds_ratio(g_xi: FullDataDistribution, j, x, z, m=None) -> float:
    """Log odds ratio of ``M_j = 1`` at ``X_j = x_j`` versus ``X_j = z``.

    The odds are taken conditionally on ``X_-j = x_-j`` and ``M_-j = m_-j``
    (`m` defaults to all other items observed), directly from the four
    ``g_xi`` masses.
    """
    space = g_xi.space
    j = space.item_index(j)
    m1, m0 = _siblings(g_xi, j, m)
    if m1 not in g_xi.patterns or m0 not in g_xi.patterns:
        raise UndefinedConditionalError(
            f"log odds ratio needs both {m0} and {m1} to be realised patterns"
        )
    x = tuple(x)
    xz = x[:j] + (space.level_index(j, z),) + x[j + 1:]
    return (
        g_xi.log_prob(x, m1) - g_xi.log_prob(x, m0)
        - g_xi.log_prob(xz, m1) + g_xi.log_prob(xz, m0)
    )


def xi_log_odds_ratio(xi: SensitivityFunction, j, x, z, m=None) -> float:
    """Closed form of :func:`conditional_log_odds_ratio` from the offsets alone."""
    space = xi.space
    j = space.item_index(j)
    if m is None:
        m = Pattern.zeros(space.p)
    bits = tuple(m)
    if len(bits) == space.p - 1:
        bits = bits[:j] + (0,) + bits[j:]
    m1, m0 = sibling_pattern(bits, j, 1), sibling_pattern(bits, j, 0)
    x = tuple(x)
    xz = x[:j] + (space.level_index(j, z),) + x[j + 1:]
    return xi(x, m1) - xi(x, m0) - xi(xz, m1) + xi(xz, m0)


@dataclass(frozen=True)
class SensitivityGrid:
    """Labelled sensitivity functions evaluated side by side."""

    labels: tuple
    functions: tuple

    def __post_init__(self):
        if not self.functions:
            raise InvalidArgumentError("a sensitivity grid needs at least one point")
        if len(self.labels) != len(self.functions):
            raise InvalidArgumentError("one label per grid point")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidArgumentError("grid labels must be unique")

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(zip(self.labels, self.functions))

    @property
    def dims(self) -> tuple[str, ...]:
        return getattr(self, "_dims", ())

    @classmethod
    def cross(
        cls,
        space: CategoricalSpace,
        axes: Mapping[str, tuple],
        reference=None,
    ) -> "SensitivityGrid":
        """Cross product of per-item offsets.

        `axes` maps an item to ``(level, values)``: the non-reference level
        whose offset varies and the list of offsets to try.  Labels are tuples
        of offsets in the order of `axes`.
        """
        items = list(axes)
        value_lists = [list(axes[i][1]) for i in items]
        labels, funcs = [], []
        for combo in product(*value_lists):
            offsets = {item: {axes[item][0]: v} for item, v in zip(items, combo)}
            labels.append(tuple(float(v) for v in combo))
            funcs.append(SensitivityFunction.from_offsets(space, offsets, reference))
        grid = cls(tuple(labels), tuple(funcs))
        object.__setattr__(grid, "_dims", tuple(space.names[space.item_index(i)] for i in items))
        return grid


def run_grid(
    observed: ObservedDistribution,
    grid: SensitivityGrid,
    functionals: Mapping[str, object],
) -> list[dict]:
    """Evaluate each functional under every grid point.

    Returns one row per (grid point, functional) in grid order with keys
    ``label``, ``functional``, ``value`` and ``error``.  A grid point whose
    construction fails gets NaN values and the error message; the remaining
    points are still evaluated.
    """
    rows = []
    for label, xi in grid:
        try:
            g = build_full_data_xi(observed, xi)
            values = {name: event_probability(g, ev) for name, ev in functionals.items()}
            err = None
        except IcinError as exc:
            values = {name: float("nan") for name in functionals}
            err = str(exc)
        for name in functionals:
            rows.append({"label": label, "functional": name, "value": values[name], "error": err})
    return rows
