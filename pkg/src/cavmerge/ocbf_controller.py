"""Time-driven safe tracking controller.

At every update instant the controller assembles one affine-in-(u, e) row
per active safety requirement — rear-end gap, merge-point gap, speed band —
plus the actuation bounds and a relaxed speed-tracking row, then solves the
2-variable QP that stays as close as possible to the reference acceleration.
All margins are control-affine with relative degree one under the
double-integrator model, so no linearization error enters the rows.
"""

from __future__ import annotations

from typing import Optional, Tuple

from .core_model import (
    CavState,
    GainConfig,
    NeighborView,
    VehicleLimits,
    b1,
    b2,
    b3,
    b4,
    clf_terms,
)
from .qp_solver import QpProblem, solve
from .ref_trajectory import ReferenceSolution, ref_control, ref_speed


def build_rows(
    xi: CavState,
    nb: NeighborView,
    g: GainConfig,
    lim: VehicleLimits,
    v_ref: Optional[float],
    u_ref: float = 0.0,
) -> QpProblem:
    """Assemble the tracking QP for one vehicle from coordinator snapshots.

    Row order: rear-end (if a same-lane predecessor exists), merge gap (if a
    conflicting vehicle exists), speed ceiling, speed floor, acceleration
    cap, deceleration cap, speed tracking (if v_ref is given).  Passing
    v_ref=None drops the tracking row — used once the reference plan has
    ended.
    """
    rows = []
    if nb.ip is not None:
        drift = nb.ip.v - xi.v
        rows.append((-g.phi, 0.0, drift + g.k1 * b1(xi, nb.ip, g)))
    if nb.ic is not None:
        drift = nb.ic.v - xi.v - (g.phi / g.L) * xi.v * xi.v
        rows.append((-(g.phi * xi.x) / g.L, 0.0, drift + g.k2 * b2(xi, nb.ic, g)))
    rows.append((-1.0, 0.0, g.k3 * b3(xi, lim)))
    rows.append((1.0, 0.0, g.k4 * b4(xi, lim)))
    rows.append((-1.0, 0.0, lim.u_max))
    rows.append((1.0, 0.0, -lim.u_min))
    if v_ref is not None:
        cu, const, relaxed = clf_terms(xi, v_ref, g)
        assert relaxed  # tracking is always soft; safety rows are hard
        rows.append((-cu, 1.0, -const))
    return QpProblem(u_ref=u_ref, relax_weight=g.relax_weight, rows=rows)


def time_driven_step(
    xi: CavState,
    nb: NeighborView,
    g: GainConfig,
    lim: VehicleLimits,
    ref: ReferenceSolution,
    t_since_entry: float,
    fallback_u: Optional[float] = None,
) -> Tuple[float, bool]:
    """One periodic control update: returns (u, feasible).

    Infeasibility is data, not an error: the fallback control is applied
    and reported via the flag so the caller can count the event.  The
    default fallback is maximum braking; callers may pass a gentler
    fallback_u (e.g. brake-to-standstill-within-one-step).
    """
    u_ref = ref_control(ref, t_since_entry, lim)
    v_ref = ref_speed(ref, t_since_entry, lim) if t_since_entry <= ref.tf else None
    problem = build_rows(xi, nb, g, lim, v_ref, u_ref=u_ref)
    sol = solve(problem)
    if sol.status == "feasible":
        return sol.u, True
    return (lim.u_min if fallback_u is None else fallback_u), False
