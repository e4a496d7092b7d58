"""Observable necessary condition for ``X_k _||_ M_j | X_-k, M_-j``.

Swapping ICIN's ``X_j _||_ M_j`` for ``X_k _||_ M_j`` (k != j) is not always
compatible with the data.  Under the swapped assumption, within each stratum
of the remaining items, the law of ``X_k`` among records missing only item j
must be a mixture, over the levels of ``X_j``, of the complete-case laws of
``X_k`` given ``X_j``.  Both sides are observable, so the condition can be
refuted from the observed-data distribution.  It is necessary only: a
feasible verdict means "not refuted".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .categorical import ObservedDistribution
from .errors import DegenerateError, InfeasibleError, InvalidArgumentError
from .lattice import Pattern

__all__ = [
    "StratumVerdict",
    "FeasibilityReport",
    "simplex_distance",
    "convex_feasibility",
    "hausman_wise_closed_form",
]

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNDETERMINED = "undetermined"


def simplex_distance(columns: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Total-variation distance from `target` to the convex hull of `columns`.

    Solves ``min 0.5 * |U c - v|_1`` over the probability simplex as a linear
    programme.  Returns the distance and the minimising weights.
    """
    u = np.asarray(columns, dtype=float)
    v = np.asarray(target, dtype=float)
    n, k = u.shape
    # variables: c (k), t (n); minimise sum t with -t <= U c - v <= t
    cost = np.concatenate([np.zeros(k), 0.5 * np.ones(n)])
    a_ub = np.block([[u, -np.eye(n)], [-u, -np.eye(n)]])
    b_ub = np.concatenate([v, -v])
    a_eq = np.concatenate([np.ones(k), np.zeros(n)])[None, :]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"simplex projection failed: {res.message}")
    c = res.x[:k]
    return float(0.5 * np.abs(u @ c - v).sum()), c


@dataclass
class StratumVerdict:
    values: tuple
    verdict: str
    violation: float | None = None
    weights: np.ndarray | None = None
    degenerate: bool = False


@dataclass
class FeasibilityReport:
    """Per-stratum verdicts for the assumption ``X_k _||_ M_j | X_-k, M_-j``."""

    j: int
    k: int
    tol: float
    strata: list[StratumVerdict] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return all(s.verdict != INFEASIBLE for s in self.strata)

    @property
    def overall(self) -> str:
        if not self.feasible:
            return INFEASIBLE
        if all(s.verdict == UNDETERMINED for s in self.strata):
            return UNDETERMINED
        return "not refuted"

    @property
    def worst_violation(self) -> float:
        vals = [s.violation for s in self.strata if s.violation is not None]
        return max(vals) if vals else 0.0

    def to_dict(self, space=None) -> dict:
        names = space.names if space is not None else None
        label = (
            f"{names[self.k]} indep M[{names[self.j]}]" if names else f"X{self.k} indep M{self.j}"
        )
        return {
            "assumption": {"j": self.j, "k": self.k, "label": label, "tol": self.tol},
            "strata": [
                {
                    "values": list(s.values),
                    "verdict": s.verdict,
                    "violation": s.violation,
                    "weights": None if s.weights is None else s.weights.tolist(),
                    "degenerate": s.degenerate,
                }
                for s in self.strata
            ],
            "overall": self.overall,
            "worst_violation": self.worst_violation,
        }


def convex_feasibility(
    observed: ObservedDistribution, j, k, tol: float = 1e-9
) -> FeasibilityReport:
    """Check whether ``X_k _||_ M_j | X_-k, M_-j`` is compatible with the data.

    For every level combination of the other items, the law of ``X_k`` given
    ``M = e_j`` (only item j missing) must lie within `tol`, in total
    variation, of the convex hull of the complete-case laws of ``X_k`` given
    ``X_j = l``.  Strata lacking data on either side are undetermined; a
    stratum whose hull collapses to a point is flagged degenerate.
    """
    space = observed.space
    j, k = space.item_index(j), space.item_index(k)
    if j == k:
        raise InvalidArgumentError("j and k must differ")
    p = space.p
    e_j = Pattern(1 if i == j else 0 for i in range(p))
    zero = Pattern.zeros(p)
    if e_j not in observed.patterns:
        raise InvalidArgumentError(f"pattern {e_j} is not realised; the condition is vacuous")
    f0 = observed.mass[zero]  # axes: all items
    fj = observed.mass[e_j]  # axes: items other than j
    rest = [i for i in range(p) if i not in (j, k)]
    # f0 reordered to (rest..., j, k); fj to (rest..., k)
    f0 = np.moveaxis(f0, [j, k], [p - 2, p - 1])
    fj_axes = [i for i in range(p) if i != j]
    fj = np.moveaxis(fj, fj_axes.index(k), p - 2)
    report = FeasibilityReport(j, k, tol)
    for stratum in np.ndindex(*(space.levels[i] for i in rest)):
        block = f0[stratum]  # (K_j, K_k)
        target = fj[stratum]  # (K_k,)
        row_mass = block.sum(axis=1)
        if target.sum() <= 0 or np.any(row_mass <= 0):
            report.strata.append(StratumVerdict(stratum, UNDETERMINED))
            continue
        u = (block / row_mass[:, None]).T  # columns u_l
        v = target / target.sum()
        dist, c = simplex_distance(u, v)
        spread = 0.5 * np.abs(u[:, :, None] - u[:, None, :]).sum(axis=0).max()
        degenerate = bool(spread <= tol)
        verdict = FEASIBLE if dist <= tol else INFEASIBLE
        report.strata.append(StratumVerdict(stratum, verdict, dist, c, degenerate))
    return report


def hausman_wise_closed_form(observed: ObservedDistribution) -> dict[Pattern, np.ndarray]:
    """Full-data masses under ``X_1 _||_ M_2 | X_2`` for two items, the first always observed.

    Solves ``sum_l pr(x_1 | X_2 = l, M = 00) c_l = f(x_1, 01)`` for the masses
    ``c_l = pr(X_2 = l, M = 01)`` and returns ``{00: f(., 00), 01: h}`` with
    ``h[x_1, l] = pr(x_1 | l, M = 00) c_l``.

    Raises
    ------
    DegenerateError
        If ``X_1`` and ``X_2`` are independent among complete cases, making
        the system singular.
    InfeasibleError
        If the solution has a negative mass; the offending mass is attached.
    """
    space = observed.space
    if space.p != 2:
        raise InvalidArgumentError("the closed form is for two items")
    p00, p01 = Pattern("00"), Pattern("01")
    if set(observed.patterns) - {p00, p01}:
        raise InvalidArgumentError("the first item must always be observed (patterns 00, 01 only)")
    k1, k2 = space.levels
    if k1 != k2:
        raise InvalidArgumentError("the closed form needs equal level counts")
    f00 = observed.mass[p00]
    f01 = observed.mass.get(p01, np.zeros(k1))
    col = f00.sum(axis=0)
    if np.any(col <= 0):
        raise DegenerateError("a level of X_2 has no complete cases")
    u = f00 / col[None, :]
    if abs(np.linalg.det(u)) < 1e-12:
        raise DegenerateError("X_1 and X_2 are independent given M_2 = 0; system is singular")
    c = np.linalg.solve(u, f01)
    h = u * c[None, :]
    masses = {p00: f00.copy(), p01: h}
    if np.any(c < 0):
        l = int(np.argmin(c))
        raise InfeasibleError(
            f"negative estimated mass {c[l]:.6g} for X_2 = level {l} among pattern 01",
            masses=masses,
            cell=(l,),
            value=float(c[l]),
        )
    return masses
