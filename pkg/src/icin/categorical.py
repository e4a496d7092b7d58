"""Saturated ICIN full-data distributions for categorical items.

The observed-data distribution assigns a mass ``f(x_obs, m)`` to each pattern
``m`` and each joint level of the items observed under ``m``.  The builder
walks the pattern lattice bottom-up, computing for every realised pattern a
log-linear term ``eta_m(x_obs)`` such that

    g(x, m) = exp( sum over realised m' below or equal to m of eta_m'(x_obs') )

reproduces the observed masses when the missing coordinates are summed out,
while each item stays conditionally independent of its own indicator given
everything else.

Arrays are indexed by 0-based level indices.  Internally each per-pattern
array is kept in "keepdims" form: full rank ``p`` with length-1 axes for the
missing items, so terms from different patterns broadcast against each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Iterator, Mapping, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import (
    InvalidArgumentError,
    NumericError,
    PositivityError,
    UndefinedConditionalError,
    UnsupportedSizeError,
)
from .lattice import Pattern, PatternSet, precedes, sibling_pattern

__all__ = [
    "MAX_CELLS",
    "MISSING",
    "CategoricalSpace",
    "ObservedDistribution",
    "FullDataDistribution",
    "LoglinearTerm",
    "LoglinearDecomposition",
    "build_eta",
    "build_full_data",
    "missingness_logit",
    "item_marginal",
    "event_mask",
    "event_probability",
    "loglinear_decomposition",
    "simulate",
]

MAX_CELLS = 10**7
MISSING = -1  # level code for a blanked coordinate in simulated records


@dataclass(frozen=True)
class CategoricalSpace:
    """Item names, level counts and level labels of a contingency table."""

    levels: tuple[int, ...]
    names: tuple[str, ...] | None = None
    labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        levels = tuple(int(k) for k in self.levels)
        if not levels:
            raise InvalidArgumentError("need at least one item")
        if any(k < 2 for k in levels):
            raise InvalidArgumentError(f"every item needs at least 2 levels: {levels}")
        n_cells = int(np.prod(levels, dtype=object))
        if n_cells > MAX_CELLS:
            raise UnsupportedSizeError(
                f"{n_cells} full cells exceeds the limit of {MAX_CELLS}"
            )
        names = self.names
        if names is None:
            names = tuple(f"x{j + 1}" for j in range(len(levels)))
        names = tuple(str(n) for n in names)
        if len(names) != len(levels) or len(set(names)) != len(names):
            raise InvalidArgumentError("item names must be unique, one per item")
        labels = self.labels
        if labels is None:
            labels = tuple(tuple(str(i + 1) for i in range(k)) for k in levels)
        labels = tuple(tuple(str(a) for a in lab) for lab in labels)
        if len(labels) != len(levels) or any(
            len(lab) != k or len(set(lab)) != k for lab, k in zip(labels, levels)
        ):
            raise InvalidArgumentError("level labels must be unique, K_j per item")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels: Mapping[str, list]) -> "CategoricalSpace":
        return cls(
            tuple(len(v) for v in labels.values()),
            tuple(labels),
            tuple(tuple(v) for v in labels.values()),
        )

    @property
    def p(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.levels

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.levels))

    def item_index(self, item) -> int:
        if isinstance(item, (int, np.integer)):
            if not 0 <= item < self.p:
                raise InvalidArgumentError(f"item index {item} out of range")
            return int(item)
        try:
            return self.names.index(item)
        except ValueError:
            raise InvalidArgumentError(f"unknown item {item!r}") from None

    def level_index(self, item, level) -> int:
        j = self.item_index(item)
        if isinstance(level, (int, np.integer)) and not isinstance(level, bool):
            if not 0 <= level < self.levels[j]:
                raise InvalidArgumentError(
                    f"level {level} out of range for item {self.names[j]}"
                )
            return int(level)
        try:
            return self.labels[j].index(str(level))
        except ValueError:
            raise InvalidArgumentError(
                f"unknown level {level!r} for item {self.names[j]}"
            ) from None

    def observed_shape(self, m) -> tuple[int, ...]:
        return tuple(self.levels[j] for j in _check_pattern(self, m).observed)

    def keepdims_shape(self, m: Pattern) -> tuple[int, ...]:
        return tuple(1 if b else k for b, k in zip(m, self.levels))

    def cells(self) -> Iterator[tuple[int, ...]]:
        return product(*(range(k) for k in self.levels))


def _check_pattern(space: CategoricalSpace, m) -> Pattern:
    m = m if isinstance(m, Pattern) else Pattern(m)
    if len(m) != space.p:
        raise InvalidArgumentError(f"pattern {m} has length {len(m)}, expected {space.p}")
    return m


class ObservedDistribution:
    """Masses ``f(x_obs, m)`` for each realised pattern ``m``.

    Parameters
    ----------
    space : CategoricalSpace
    mass : mapping
        Pattern (or bit string) to an array over the levels of the items
        observed under that pattern, in item order.  The all-missing pattern
        maps to a scalar.
    tol : float
        Allowed deviation of the total mass from 1.
    """

    def __init__(self, space: CategoricalSpace, mass: Mapping, tol: float = 1e-12):
        self.space = space
        arrays = {}
        for key, values in mass.items():
            m = _check_pattern(space, key)
            arr = np.array(values, dtype=float)
            shape = space.observed_shape(m)
            if arr.shape != shape:
                if arr.size == int(np.prod(shape)):
                    arr = arr.reshape(shape)
                else:
                    raise InvalidArgumentError(
                        f"pattern {m}: expected mass array of shape {shape}, got {arr.shape}"
                    )
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InvalidArgumentError(f"pattern {m}: masses must be finite and >= 0")
            arr.setflags(write=False)
            arrays[m] = arr
        self.patterns = PatternSet(arrays, space.p)
        self.mass = {m: arrays[m] for m in self.patterns}
        total = self.total()
        if abs(total - 1.0) > tol:
            raise InvalidArgumentError(f"observed masses sum to {total!r}, not 1")

    @classmethod
    def from_cells(cls, space: CategoricalSpace, cells: Mapping, tol: float = 1e-12):
        """Build from ``{pattern: {observed_cell_tuple: mass}}``; omitted cells are 0."""
        mass = {}
        for key, entries in cells.items():
            m = _check_pattern(space, key)
            arr = np.zeros(space.observed_shape(m))
            for cell, value in entries.items():
                arr[tuple(cell)] = value
            mass[m] = arr
        return cls(space, mass, tol=tol)

    def total(self) -> float:
        return float(sum(a.sum() for a in self.mass.values()))

    def prob(self, m, cell=()) -> float:
        """``f(x_obs, m)``; zero for patterns outside the realised set."""
        m = _check_pattern(self.space, m)
        if m not in self.mass:
            return 0.0
        return float(self.mass[m][tuple(cell)])

    def items(self) -> Iterator[tuple[Pattern, tuple[int, ...], float]]:
        """Iterate ``(pattern, observed_cell, mass)`` in traversal order."""
        for m in self.patterns:
            arr = self.mass[m]
            for cell in np.ndindex(arr.shape):
                yield m, cell, float(arr[cell])

    @property
    def n_cells(self) -> int:
        return sum(a.size for a in self.mass.values())

    def check_positive(self) -> None:
        for m, cell, value in self.items():
            if not value > 0:
                raise PositivityError(
                    f"observed mass at pattern {m}, cell {cell} is {value}; "
                    "construction needs strictly positive masses",
                    pattern=m,
                    cell=cell,
                )

    def __repr__(self) -> str:
        return (
            f"ObservedDistribution(levels={self.space.levels}, "
            f"patterns={[str(m) for m in self.patterns]})"
        )


# --------------------------------------------------------------------------
# Lattice recursion


@lru_cache(maxsize=256)
def _predecessor_table(patterns: tuple[Pattern, ...]):
    return {
        m: tuple(s for s in patterns if s != m and precedes(s, m)) for m in patterns
    }


def _keepdims(space: CategoricalSpace, m: Pattern, arr: np.ndarray, batch: int = 0):
    return arr.reshape(arr.shape[:batch] + space.keepdims_shape(m))


def _recursion(space, patterns, log_f, offsets=None, batch=0):
    """Core recursion on keepdims arrays with `batch` leading axes.

    `offsets` maps pattern to an additive log-scale term over full cells (or
    is None).  Returns ``(eta, log_g)`` dictionaries in keepdims form.
    """
    order = tuple(patterns)
    preds = _predecessor_table(order)
    eta, log_g = {}, {}
    for m in order:
        below = preds[m]
        acc = None
        for s in below:
            acc = eta[s] if acc is None else acc + eta[s]
        if offsets is not None and offsets.get(m) is not None:
            acc = offsets[m] if acc is None else acc + offsets[m]
        if acc is None:
            eta_m = log_f[m]
        else:
            missing = tuple(batch + j for j in m.missing)
            if missing:
                full = np.broadcast_to(acc, np.broadcast_shapes(acc.shape, log_f[m].shape[:batch] + space.shape))
                with np.errstate(over="ignore", invalid="ignore"):
                    norm = logsumexp(full, axis=missing, keepdims=True)
            else:
                norm = acc
            if not np.all(np.isfinite(norm)):
                raise NumericError(f"non-finite log normaliser at pattern {m}")
            eta_m = log_f[m] - norm
        eta[m] = eta_m
        total = eta_m if acc is None else acc + eta_m
        log_g[m] = total
    return eta, log_g


def _log_f(observed: ObservedDistribution):
    observed.check_positive()
    space = observed.space
    return {m: _keepdims(space, m, np.log(observed.mass[m])) for m in observed.patterns}


def build_eta(observed: ObservedDistribution) -> dict[Pattern, np.ndarray]:
    """Lattice terms ``eta_m`` over the observed items of each realised pattern.

    Raises
    ------
    PositivityError
        If any observed mass is zero.
    NumericError
        If a log normaliser is not finite.
    """
    return build_full_data(observed).eta


class FullDataDistribution:
    """Joint masses ``g(x, m)`` over full cells and realised patterns.

    Attributes
    ----------
    space, patterns
        The categorical space and realised pattern set.
    eta : dict
        Pattern to its lattice term, an array over the observed items.
    log_mass : dict
        Pattern to ``log g(., m)``, an array of the full table shape.
    offsets : dict or None
        Pattern to the sensitivity offset added inside the exponent, when the
        distribution was built with one.
    """

    def __init__(self, space, patterns, eta, log_mass, offsets=None, xi=None):
        self.space = space
        self.patterns = patterns
        self.eta = eta
        self.log_mass = log_mass
        self.offsets = offsets
        self.xi = xi

    def slice(self, m) -> np.ndarray:
        """``g(., m)`` over full cells; zeros when `m` is not realised."""
        m = _check_pattern(self.space, m)
        if m not in self.log_mass:
            return np.zeros(self.space.shape)
        return np.exp(self.log_mass[m])

    def log_prob(self, x, m) -> float:
        m = _check_pattern(self.space, m)
        if m not in self.log_mass:
            return -np.inf
        return float(self.log_mass[m][tuple(x)])

    def prob(self, x, m) -> float:
        return float(np.exp(self.log_prob(x, m)))

    def table(self) -> np.ndarray:
        """Masses stacked as ``(len(patterns), *space.shape)`` in traversal order."""
        return np.stack([np.exp(self.log_mass[m]) for m in self.patterns])

    def total(self) -> float:
        return float(self.table().sum())

    def observed_margin(self, m) -> np.ndarray:
        """``g`` summed over the items missing under `m`, in observed-item shape."""
        m = _check_pattern(self.space, m)
        return self.slice(m).sum(axis=m.missing)

    def records(self) -> Iterator[tuple[tuple[int, ...], Pattern, float]]:
        for m in self.patterns:
            arr = np.exp(self.log_mass[m])
            for cell in np.ndindex(arr.shape):
                yield cell, m, float(arr[cell])

    def __repr__(self) -> str:
        return (
            f"FullDataDistribution(levels={self.space.levels}, "
            f"patterns={[str(m) for m in self.patterns]})"
        )


def _assemble(observed, eta_kd, log_g_kd, offsets=None, xi=None):
    space = observed.space
    eta = {m: e.reshape(space.observed_shape(m)) for m, e in eta_kd.items()}
    log_mass = {
        m: np.broadcast_to(lg, space.shape).copy() for m, lg in log_g_kd.items()
    }
    for arr in (*eta.values(), *log_mass.values()):
        arr.setflags(write=False)
    return FullDataDistribution(space, observed.patterns, eta, log_mass, offsets, xi)


def build_full_data(observed: ObservedDistribution) -> FullDataDistribution:
    """Construct the saturated ICIN full-data distribution.

    Every observed mass must be strictly positive.  ``g(., 0_p)`` equals the
    complete-case slice of the observed distribution exactly.
    """
    log_f = _log_f(observed)
    eta, log_g = _recursion(observed.space, observed.patterns, log_f)
    return _assemble(observed, eta, log_g)


# --------------------------------------------------------------------------
# Queries


def missingness_logit(g: FullDataDistribution, j, m, x) -> float:
    """Logit of ``pr(M_j = 1 | M_-j = m_-j, X = x)``.

    `m` is either a full-length pattern (its entry `j` is ignored) or the
    length ``p - 1`` pattern of the other items.  Returns ``+inf`` or
    ``-inf`` when exactly one of the two sibling patterns is unrealised.
    """
    space = g.space
    j = space.item_index(j)
    bits = tuple(m)
    if len(bits) == space.p - 1:
        bits = bits[:j] + (0,) + bits[j:]
    m = _check_pattern(space, bits)
    m1, m0 = sibling_pattern(m, j, 1), sibling_pattern(m, j, 0)
    if m1 not in g.patterns and m0 not in g.patterns:
        raise UndefinedConditionalError(
            f"neither {m1} nor {m0} is a realised pattern; conditional undefined"
        )
    return g.log_prob(x, m1) - g.log_prob(x, m0)


def item_marginal(g: FullDataDistribution) -> np.ndarray:
    """``pr(X = x)``, summing ``g`` over realised patterns."""
    return g.table().sum(axis=0)


Event = Callable[[tuple], bool] | Mapping | np.ndarray


def event_mask(space: CategoricalSpace, event) -> np.ndarray:
    """Boolean array over full cells for an event.

    `event` may be a boolean array of the table shape, a predicate over
    level-index tuples, or a mapping from item (name or index) to a level or
    collection of levels (labels or indices), read as a conjunction.  ``None``
    and the empty mapping are the sure event.
    """
    if event is None:
        return np.ones(space.shape, dtype=bool)
    if isinstance(event, np.ndarray):
        if event.shape != space.shape:
            raise InvalidArgumentError(f"event mask must have shape {space.shape}")
        return event.astype(bool)
    if isinstance(event, Mapping):
        mask = np.ones(space.shape, dtype=bool)
        for item, levels in event.items():
            j = space.item_index(item)
            if isinstance(levels, (str, int, np.integer)):
                levels = [levels]
            allowed = np.zeros(space.levels[j], dtype=bool)
            for level in levels:
                allowed[space.level_index(j, level)] = True
            shape = [1] * space.p
            shape[j] = space.levels[j]
            mask &= allowed.reshape(shape)
        return mask
    if callable(event):
        mask = np.zeros(space.shape, dtype=bool)
        for cell in space.cells():
            mask[cell] = bool(event(cell))
        return mask
    raise InvalidArgumentError(f"unsupported event type {type(event).__name__}")


def event_probability(g: FullDataDistribution, event) -> float:
    """Total ``g`` mass of full cells in `event`, summed over patterns."""
    return float(item_marginal(g)[event_mask(g.space, event)].sum())


# --------------------------------------------------------------------------
# Log-linear re-expression


class LoglinearTerm(NamedTuple):
    """Interaction among the items `x_items` (at `levels`) and the indicators `m_items`."""

    x_items: tuple[int, ...]
    m_items: tuple[int, ...]
    levels: tuple[int, ...]

    def label(self, space: CategoricalSpace | None = None) -> str:
        def name(j):
            return space.names[j] if space is not None else f"{j + 1}"

        sup = "".join(f"X[{name(j)}]" for j in self.x_items) + "".join(
            f"M[{name(j)}]" for j in self.m_items
        )
        if space is not None:
            levs = [space.labels[j][k] for j, k in zip(self.x_items, self.levels)]
        else:
            levs = [str(k) for k in self.levels]
        sub = ",".join(levs + ["1"] * len(self.m_items))
        return f"eta^{{{sup or '0'}}}_{{{sub}}}"


@dataclass
class LoglinearDecomposition:
    """Corner-point coded log-linear coefficients of a full-data distribution.

    The first level of every item and ``M_j = 0`` are the reference
    categories; only non-reference coefficients are stored.
    """

    space: CategoricalSpace
    patterns: PatternSet
    terms: dict[LoglinearTerm, float] = field(default_factory=dict)

    def __getitem__(self, term) -> float:
        return self.terms.get(LoglinearTerm(*term), 0.0)

    def log_mass(self, x, m) -> float:
        """Sum of the coefficients active at ``(x, m)``."""
        m = _check_pattern(self.space, m)
        if m not in self.patterns:
            return -np.inf
        missing = set(m.missing)
        total = 0.0
        for t, value in self.terms.items():
            if set(t.m_items) <= missing and all(x[j] == k for j, k in zip(t.x_items, t.levels)):
                total += value
        return total

    def pairs_item_with_own_indicator(self) -> bool:
        return any(set(t.x_items) & set(t.m_items) for t in self.terms)


def _corner_point(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    for axis in range(out.ndim):
        ref = np.take(out, [0], axis=axis)
        idx = [slice(None)] * out.ndim
        idx[axis] = slice(1, None)
        out[tuple(idx)] -= ref
    return out


def loglinear_decomposition(g: FullDataDistribution, max_items: int = 6) -> LoglinearDecomposition:
    """Re-express ``log g`` as a hierarchical log-linear model.

    Each lattice term ``eta_m`` expands into interactions among the items
    observed under ``m`` and the indicators of the items missing under ``m``.
    Sensitivity offsets, when present, appear as item-by-own-indicator terms.
    """
    space = g.space
    if space.p > max_items:
        raise UnsupportedSizeError(
            f"decomposition supports at most {max_items} items, got {space.p}"
        )
    out = LoglinearDecomposition(space, g.patterns)
    for m in g.patterns:
        obs = m.observed
        coded = _corner_point(g.eta[m])
        for idx in np.ndindex(coded.shape):
            support = tuple(a for a, k in enumerate(idx) if k)
            term = LoglinearTerm(
                tuple(obs[a] for a in support), m.missing, tuple(idx[a] for a in support)
            )
            value = float(coded[idx])
            if value != 0.0 or not support:
                out.terms[term] = value
    if g.xi is not None:
        for j, table in enumerate(g.xi.tables):
            for k in range(space.levels[j]):
                if table[k] != 0.0:
                    out.terms[LoglinearTerm((j,), (j,), (k,))] = float(table[k])
    return out


# --------------------------------------------------------------------------
# Simulation


def simulate(g: FullDataDistribution, n: int, seed: int) -> np.ndarray:
    """Draw `n` records from `g`.

    Returns an ``(n, p)`` integer array of level indices in which items
    missing under the drawn pattern hold :data:`MISSING`.
    """
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    rng = np.random.default_rng(seed)
    table = g.table()
    probs = table.ravel()
    draws = rng.choice(probs.size, size=n, p=probs / probs.sum())
    pat_idx, cell_flat = np.divmod(draws, g.space.n_cells)
    cells = np.stack(np.unravel_index(cell_flat, g.space.shape), axis=1)
    masks = np.array([list(m) for m in g.patterns], dtype=bool)[pat_idx]
    cells[masks] = MISSING
    return cells
