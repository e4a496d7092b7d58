"""Missingness patterns and the lattice they form.

A pattern is a tuple of 0/1 flags, one per item, with 1 marking a missing
item.  ``m.precedes(m2)`` holds when ``m2`` misses at least the items ``m``
misses.  Items are indexed from 0.
"""

from __future__ import annotations

import json
from itertools import product
from typing import Iterable, Iterator, Sequence

from .errors import InvalidArgumentError

__all__ = [
    "Pattern",
    "PatternSet",
    "precedes",
    "strict_predecessors",
    "traversal_order",
    "sibling_pattern",
    "full_lattice",
]


class Pattern(tuple):
    """Immutable sequence of missingness indicators.

    Construct from any iterable of 0/1 values or from a bit string::

        >>> Pattern("010")
        Pattern('010')
        >>> Pattern([0, 1, 0]).missing
        (1,)
    """

    def __new__(cls, bits: Iterable[int] | str):
        if isinstance(bits, str):
            if any(c not in "01" for c in bits):
                raise InvalidArgumentError(f"not a bit string: {bits!r}")
            values = tuple(int(c) for c in bits)
        else:
            values = tuple(int(b) for b in bits)
            if any(b not in (0, 1) for b in values):
                raise InvalidArgumentError(f"pattern entries must be 0 or 1: {values}")
        if not values:
            raise InvalidArgumentError("a pattern needs at least one item")
        return super().__new__(cls, values)

    @classmethod
    def zeros(cls, p: int) -> "Pattern":
        return cls((0,) * p)

    @classmethod
    def ones(cls, p: int) -> "Pattern":
        return cls((1,) * p)

    @property
    def p(self) -> int:
        return len(self)

    @property
    def missing(self) -> tuple[int, ...]:
        """Indices of missing items."""
        return tuple(j for j, b in enumerate(self) if b)

    @property
    def observed(self) -> tuple[int, ...]:
        """Indices of observed items."""
        return tuple(j for j, b in enumerate(self) if not b)

    @property
    def n_missing(self) -> int:
        return sum(self)

    def complement(self) -> "Pattern":
        return Pattern(1 - b for b in self)

    def precedes(self, other: "Pattern") -> bool:
        return precedes(self, other)

    def __str__(self) -> str:
        return "".join(str(b) for b in self)

    def __repr__(self) -> str:
        return f"Pattern('{self}')"


def _as_pattern(m) -> Pattern:
    return m if isinstance(m, Pattern) else Pattern(m)


def precedes(m, m2) -> bool:
    """Return True when every item missing under `m` is also missing under `m2`."""
    m, m2 = _as_pattern(m), _as_pattern(m2)
    if len(m) != len(m2):
        raise InvalidArgumentError(f"pattern lengths differ: {m} vs {m2}")
    return all(b2 >= b for b, b2 in zip(m, m2))


def _order_key(m: Pattern):
    return (m.n_missing, tuple(m))


class PatternSet(Sequence):
    """A finite set of patterns of common length containing the all-observed one.

    Iteration follows :func:`traversal_order`.
    """

    def __init__(self, patterns: Iterable, p: int | None = None):
        pats = [_as_pattern(m) for m in patterns]
        if p is None:
            if not pats:
                raise InvalidArgumentError("empty pattern set needs an explicit p")
            p = len(pats[0])
        if any(len(m) != p for m in pats):
            raise InvalidArgumentError(f"all patterns must have length {p}")
        if len(set(pats)) != len(pats):
            raise InvalidArgumentError("duplicate patterns")
        if Pattern.zeros(p) not in pats:
            raise InvalidArgumentError(
                "the all-observed pattern must be a member of the pattern set"
            )
        self.p = p
        self._ordered = tuple(sorted(pats, key=_order_key))
        self._members = frozenset(self._ordered)

    def __getitem__(self, i):
        return self._ordered[i]

    def __len__(self) -> int:
        return len(self._ordered)

    def __iter__(self) -> Iterator[Pattern]:
        return iter(self._ordered)

    def __contains__(self, m) -> bool:
        try:
            return _as_pattern(m) in self._members
        except InvalidArgumentError:
            return False

    def __eq__(self, other) -> bool:
        if isinstance(other, PatternSet):
            return self._members == other._members
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._members)

    def __repr__(self) -> str:
        return f"PatternSet({[str(m) for m in self._ordered]})"

    def to_json(self) -> str:
        return json.dumps([str(m) for m in self._ordered])

    @classmethod
    def from_json(cls, text: str) -> "PatternSet":
        return cls(json.loads(text))


def full_lattice(p: int) -> PatternSet:
    """All 2**p patterns."""
    return PatternSet(product((0, 1), repeat=p), p)


def traversal_order(patterns: Iterable) -> list[Pattern]:
    """Linear extension of the partial order.

    Patterns are sorted by their number of missing items, ties broken by the
    lexicographic order of the bits.
    """
    return sorted((_as_pattern(m) for m in patterns), key=_order_key)


def strict_predecessors(m, patterns: Iterable) -> list[Pattern]:
    """Members of `patterns` strictly below `m`, in traversal order."""
    m = _as_pattern(m)
    return [s for s in traversal_order(patterns) if s != m and precedes(s, m)]


def sibling_pattern(m, j: int, bit: int) -> Pattern:
    """Copy of `m` with entry `j` (0-based) set to `bit`."""
    m = _as_pattern(m)
    if not 0 <= j < len(m):
        raise InvalidArgumentError(f"item index {j} out of range for p={len(m)}")
    if bit not in (0, 1):
        raise InvalidArgumentError(f"bit must be 0 or 1, got {bit}")
    bits = list(m)
    bits[j] = bit
    return Pattern(bits)
