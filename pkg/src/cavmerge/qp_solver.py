"""Exact solver for the per-vehicle tracking QPs.

Every control update, regardless of discipline, reduces to

    min  0.5*(u - u_ref)^2 + relax_weight * e^2
    s.t. c_u*u + c_e*e + c_0 >= 0   for each constraint row

in the two decision variables (u, e).  With a strictly convex, coercive
objective and at most two variables, enumerating candidate active sets of
size 0, 1, and 2 is exhaustive: the optimum of the QP (if the polytope is
nonempty) is the least-objective primal-feasible candidate, and the absence
of any feasible candidate certifies an empty polytope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

FEAS_TOL = 1e-9      # absolute primal feasibility tolerance
SINGULAR_TOL = 1e-12  # pair systems with |det| below this are skipped

Row = Tuple[float, float, float]  # (c_u, c_e, c_0) encoding c_u*u + c_e*e + c_0 >= 0


@dataclass(frozen=True)
class QpProblem:
    u_ref: float
    relax_weight: float
    rows: Tuple[Row, ...]

    def __init__(self, u_ref: float, relax_weight: float, rows: Sequence[Row]):
        object.__setattr__(self, "u_ref", float(u_ref))
        object.__setattr__(self, "relax_weight", float(relax_weight))
        object.__setattr__(self, "rows", tuple((float(a), float(b), float(c)) for a, b, c in rows))


@dataclass(frozen=True)
class QpSolution:
    status: str  # "feasible" | "infeasible"
    u: float
    e: float
    active_set: Tuple[int, ...]
    objective: float

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


INFEASIBLE = QpSolution("infeasible", math.nan, math.nan, (), math.inf)


def _objective(p: QpProblem, u: float, e: float) -> float:
    du = u - p.u_ref
    return 0.5 * du * du + p.relax_weight * e * e


def _is_feasible(p: QpProblem, u: float, e: float) -> bool:
    for cu, ce, c0 in p.rows:
        if cu * u + ce * e + c0 < -FEAS_TOL:
            return False
    return True


def solve(p: QpProblem) -> QpSolution:
    """Minimize over the row polytope by exhaustive active-set enumeration.

    Candidates: the unconstrained stationary point (u_ref, 0); for each row,
    the objective minimizer restricted to that row as an equality; for each
    pair of rows, their intersection point.  Ties break toward the smaller
    active set, then lexicographically lower row indices, for bit-stable
    output on identical input.
    """
    if not all(math.isfinite(c) for row in p.rows for c in row) or not math.isfinite(p.u_ref):
        raise ValueError("rows and u_ref must be finite")
    lam = p.relax_weight
    if lam <= 0:
        raise ValueError("relax_weight must be positive")

    best: QpSolution | None = None

    def consider(u: float, e: float, active: Tuple[int, ...]) -> None:
        nonlocal best
        if not (math.isfinite(u) and math.isfinite(e)):
            return
        if not _is_feasible(p, u, e):
            return
        obj = _objective(p, u, e)
        if best is None:
            best = QpSolution("feasible", u, e, active, obj)
            return
        if obj < best.objective - 0.0:
            better = True
        elif obj == best.objective:
            better = (len(active), active) < (len(best.active_set), best.active_set)
        else:
            better = False
        if better:
            best = QpSolution("feasible", u, e, active, obj)

    # size 0: unconstrained optimum
    consider(p.u_ref, 0.0, ())

    # size 1: minimizer on each row boundary; from stationarity the step off
    # the unconstrained optimum is along (c_u, c_e/(2*lam)) scaled by mu
    rows = p.rows
    for j, (cu, ce, c0) in enumerate(rows):
        denom = cu * cu + ce * ce / (2.0 * lam)
        if denom <= SINGULAR_TOL:
            continue
        mu = -(cu * p.u_ref + c0) / denom
        consider(p.u_ref + mu * cu, mu * ce / (2.0 * lam), (j,))

    # size 2: vertex of each row pair
    n = len(rows)
    for j in range(n):
        cuj, cej, c0j = rows[j]
        for k in range(j + 1, n):
            cuk, cek, c0k = rows[k]
            det = cuj * cek - cej * cuk
            if abs(det) <= SINGULAR_TOL:
                continue
            u = (-c0j * cek + cej * c0k) / det
            e = (-cuj * c0k + c0j * cuk) / det
            consider(u, e, (j, k))

    return best if best is not None else INFEASIBLE


def feasibility_check(p: QpProblem) -> bool:
    """True iff the row polytope in (u, e) is nonempty.

    Solved by minimizing a strictly convex coercive stand-in objective over
    the same rows: a nonempty closed polytope always contains that minimizer,
    so the enumeration finds a point exactly when one exists.
    """
    probe = QpProblem(u_ref=0.0, relax_weight=p.relax_weight, rows=p.rows)
    return solve(probe).feasible
