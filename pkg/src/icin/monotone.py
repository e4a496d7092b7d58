"""ICIN under monotone dropout.

With dropout, pattern ``m`` is a run of trailing ones and is summarised by the
dropout time ``T = 1 + p - sum(m)``; ``T = p + 1`` means the record is
complete.  The lattice is then a chain and the only realisable conditionals
pair adjacent dropout times, so the construction reduces to sequential odds:
``log pr(T = j + 1 | x) / pr(T = j | x) = -eta_j(x_<j)``.

Times are 1-based, matching their meaning as measurement occasions.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .categorical import (
    MISSING,
    CategoricalSpace,
    FullDataDistribution,
    ObservedDistribution,
    build_full_data,
)
from .errors import InvalidArgumentError, NumericError
from .lattice import Pattern, PatternSet

__all__ = [
    "is_monotone",
    "dropout_time",
    "pattern_for_time",
    "DropoutPatternSet",
    "build_monotone",
    "eta_at_time",
    "sequential_log_odds",
    "dropout_records",
]

FACTORIZATION_TOL = 1e-12


def is_monotone(m) -> bool:
    bits = tuple(m)
    return all(a <= b for a, b in zip(bits, bits[1:]))


def dropout_time(m) -> int:
    """``1 + p - sum(m)`` for a monotone pattern."""
    m = m if isinstance(m, Pattern) else Pattern(m)
    if not is_monotone(m):
        raise InvalidArgumentError(f"pattern {m} is not a dropout pattern")
    return 1 + m.p - m.n_missing


def pattern_for_time(t: int, p: int) -> Pattern:
    if not 1 <= t <= p + 1:
        raise InvalidArgumentError(f"dropout time {t} outside 1..{p + 1}")
    return Pattern((0,) * (t - 1) + (1,) * (p + 1 - t))


class DropoutPatternSet(PatternSet):
    """A contiguous chain of dropout patterns that includes the complete pattern."""

    def __init__(self, patterns, p: int | None = None):
        super().__init__(patterns, p)
        for m in self:
            if not is_monotone(m):
                raise InvalidArgumentError(f"pattern {m} is not a dropout pattern")
        times = sorted(dropout_time(m) for m in self)
        if times != list(range(times[0], self.p + 2)):
            raise InvalidArgumentError(f"dropout times {times} are not contiguous")

    @classmethod
    def chain(cls, p: int, earliest: int = 1) -> "DropoutPatternSet":
        """Patterns for dropout times ``earliest .. p + 1``."""
        return cls([pattern_for_time(t, p) for t in range(earliest, p + 2)], p)

    @property
    def times(self) -> list[int]:
        return sorted(dropout_time(m) for m in self)


def eta_at_time(g: FullDataDistribution, t: int) -> np.ndarray:
    """``eta_t`` as an array over ``x_<t``."""
    return g.eta[pattern_for_time(t, g.space.p)]


def _check_factorization(g: FullDataDistribution, times: Sequence[int]) -> float:
    p = g.space.p
    worst = 0.0
    for t in times:
        if t + 1 not in times:
            continue
        eta = eta_at_time(g, t).reshape(g.space.keepdims_shape(pattern_for_time(t, p)))
        lhs = g.slice(pattern_for_time(t, p))
        rhs = np.exp(eta) * g.slice(pattern_for_time(t + 1, p))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def build_monotone(observed: ObservedDistribution) -> FullDataDistribution:
    """Full-data distribution for dropout data.

    Runs the general construction on the dropout chain and then checks the
    factorisation ``g(x, T=j) = exp(eta_j(x_<j)) g(x, T=j+1)`` cell by cell.
    """
    chain = DropoutPatternSet(observed.patterns, observed.space.p)
    g = build_full_data(observed)
    worst = _check_factorization(g, chain.times)
    if worst > FACTORIZATION_TOL:
        raise NumericError(f"dropout factorisation violated by {worst:.3g}")
    return g


def sequential_log_odds(g: FullDataDistribution, t: int, x) -> float:
    """``log pr(T = t + 1 | X = x) / pr(T = t | X = x)``, which equals ``-eta_t(x_<t)``."""
    p = g.space.p
    lo, hi = pattern_for_time(t, p), pattern_for_time(t + 1, p) if t <= p else None
    if hi is None or lo not in g.patterns or hi not in g.patterns:
        raise InvalidArgumentError(f"dropout times {t} and {t + 1} are not both in the chain")
    x = tuple(x)
    return -float(g.eta[lo][x[: t - 1]])


def dropout_records(rows: Sequence[Sequence], space: CategoricalSpace, missing=("", "NA")):
    """Map longitudinal rows of level labels to level-index records.

    Blanks must be trailing; a blank followed by a value raises with the
    1-based row number.
    """
    out = np.empty((len(rows), space.p), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != space.p:
            raise InvalidArgumentError(f"row {i + 1}: expected {space.p} values")
        seen_blank = False
        for j, value in enumerate(row):
            blank = value is None or str(value).strip() in missing
            if blank:
                seen_blank = True
                out[i, j] = MISSING
            elif seen_blank:
                raise InvalidArgumentError(
                    f"row {i + 1}: value after a missing occasion; dropout must be monotone"
                )
            else:
                out[i, j] = space.level_index(j, str(value).strip())
    return out
