"""Self-triggered control: margined rows, violation-time prediction.

Each vehicle solves its QP only when needed: after a solve with control u
held constant, the first future instant at which any original safety row
would reach zero is computed in closed form (linear / quadratic / cubic in
the elapsed time, because accelerations are constant between solves).  To
make a minimum dwell T_d possible at all, every safety row is tightened at
the solve instant by a margin sigma_q bounding how much the row can decay
over one dwell interval; tightened rows guarantee no violation occurs
before t + T_d, so the predicted times can be snapped down to a T_d grid.

Margins come in two forms.  The default is the dimensionally consistent
worst-case bound re-derived from the constant-control expansion of each
row (every term carries a factor of the dwell time, so margins vanish as
T_d -> 0, and the bound is sound for any gain choice).  A compatibility
flag switches to an alternative grouping that moves the row gains around
and keeps a dwell-independent leading term in the rear-end margin; the two
coincide for the merge row at unit gains, and the compatibility rear-end
margin is always at least the default one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .core_model import (
    CavState,
    GainConfig,
    NeighborView,
    VehicleLimits,
    b1,
    b2,
)
from .ocbf_controller import build_rows
from .qp_solver import QpProblem, solve
from .ref_trajectory import ReferenceSolution, ref_control, ref_speed

INF = float("inf")
DEGENERATE_COEFF = 1e-12  # below this a polynomial degree is demoted
GRID_EPS = 1e-9           # tolerance for grid snapping / coincidence tests


@dataclass(frozen=True)
class TriggerConfig:
    """Dwell and cap for the self-triggered scheduler.

    T_d is both the minimum inter-solve time and the time grid all solve
    instants live on; T_max caps how long a control may be held.
    compat_margins switches the rear-end/merge margins and the merge
    violation cubic to the alternative coefficient grouping (see module
    docstring)."""

    T_d: float = 0.05
    T_max: float = 1.0
    compat_margins: bool = False

    def validate(self) -> None:
        if not (0.0 < self.T_d <= self.T_max):
            raise ValueError(
                f"need 0 < T_d <= T_max, got T_d={self.T_d}, T_max={self.T_max}")


@dataclass(frozen=True)
class MarginSet:
    """Per-row decay bounds over one dwell interval (all >= 0).

    sigma1/sigma2 tighten the speed ceiling/floor rows, sigma3 the
    rear-end row, sigma4 the merge row; absent neighbors give zero."""

    sigma1: float
    sigma2: float
    sigma3: float
    sigma4: float


def margins(
    xi: CavState,
    nb: NeighborView,
    g: GainConfig,
    lim: VehicleLimits,
    tc: TriggerConfig,
    worst_case_neighbors: bool = False,
) -> MarginSet:
    """Bound each safety row's worst-case decay over [t, t+T_d].

    Speed rows decay at most k*u_M*T_d (their slope is -k*u).  The
    rear-end and merge rows are expanded exactly in the hold time (their
    coefficients are polynomial in the states and constant controls) and
    each coefficient is bounded by actuation and current-state magnitudes.
    With worst_case_neighbors set, the neighbor accelerations entering the
    bounds are replaced by the actuation magnitude u_M — used when a
    neighbor re-solves at the same instant, so its fresh control is
    unknowable."""
    Td = tc.T_d
    u_M = lim.u_M
    s1 = g.k3 * u_M * Td
    s2 = g.k4 * u_M * Td
    s3 = 0.0
    if nb.ip is not None:
        a_p = u_M if worst_case_neighbors else abs(nb.ip.u)
        dv = abs(nb.ip.v - xi.v)
        if tc.compat_margins:
            s3 = a_p + g.k1 * (0.5 * Td * Td * (a_p + u_M)
                               + (dv + (1.0 + g.phi) * u_M) * Td)
        else:
            s3 = ((a_p + u_M) * Td
                  + g.k1 * (0.5 * (a_p + u_M) * Td * Td
                            + (dv + g.phi * u_M) * Td))
    s4 = 0.0
    if nb.ic is not None:
        a_c = u_M if worst_case_neighbors else abs(nb.ic.u)
        vi, axi, vc = abs(xi.v), abs(xi.x), abs(nb.ic.v)
        r = g.phi / g.L
        if tc.compat_margins:
            k = g.k2  # merge-row gain (a switchable alternative grouping)
            s4 = (0.5 * r * u_M * u_M * Td**3
                  + k * (1.5 * r * (u_M * u_M + vi * u_M)
                         + 0.5 * (a_c + u_M)) * Td * Td
                  + (a_c + (3.0 * r * vi + r * axi + 1.0) * u_M
                     + vc + vi + r * xi.v * xi.v) * k * Td)
        else:
            k = g.k2
            s4 = (k * 0.5 * r * u_M * u_M * Td**3
                  + (1.5 * r * u_M * u_M
                     + k * (1.5 * r * vi * u_M + 0.5 * (a_c + u_M))) * Td * Td
                  + ((a_c + u_M) + 3.0 * r * vi * u_M
                     + k * (vc + vi + r * (xi.v * xi.v + axi * u_M))) * Td)
    return MarginSet(sigma1=s1, sigma2=s2, sigma3=s3, sigma4=s4)


def self_triggered_qp(
    xi: CavState,
    nb: NeighborView,
    g: GainConfig,
    lim: VehicleLimits,
    tc: TriggerConfig,
    ref: ReferenceSolution,
    t_since_entry: float,
    worst_case_neighbors: bool = False,
    fallback_u: Optional[float] = None,
) -> Tuple[float, float, bool]:
    """One self-triggered solve: returns (u, e, feasible).

    The nominal rows are tightened by the dwell margins (tracking row and
    actuation caps untouched); a feasible solution therefore keeps every
    original safety row nonnegative until at least t + T_d."""
    u_ref = ref_control(ref, t_since_entry, lim)
    v_ref = (ref_speed(ref, t_since_entry, lim)
             if t_since_entry <= ref.tf else None)
    p = build_rows(xi, nb, g, lim, v_ref, u_ref=u_ref)
    s = margins(xi, nb, g, lim, tc, worst_case_neighbors)
    rows = list(p.rows)
    idx = 0
    if nb.ip is not None:
        cu, ce, c0 = rows[idx]
        rows[idx] = (cu, ce, c0 - s.sigma3)
        idx += 1
    if nb.ic is not None:
        cu, ce, c0 = rows[idx]
        rows[idx] = (cu, ce, c0 - s.sigma4)
        idx += 1
    cu, ce, c0 = rows[idx]
    rows[idx] = (cu, ce, c0 - s.sigma1)
    cu, ce, c0 = rows[idx + 1]
    rows[idx + 1] = (cu, ce, c0 - s.sigma2)
    sol = solve(QpProblem(u_ref=p.u_ref, relax_weight=p.relax_weight, rows=rows))
    if sol.status != "feasible":
        return (lim.u_min if fallback_u is None else fallback_u), 0.0, False
    return sol.u, sol.e, True


# ---------------------------------------------------------------------------
# violation-time prediction: closed-form polynomial roots in the hold time
# ---------------------------------------------------------------------------

def _cbrt(x: float) -> float:
    """Real (signed) cube root; math.cbrt needs 3.11+."""
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _cubic_real_roots(a3: float, a2: float, a1: float, a0: float):
    """All real roots of a3 x^3 + a2 x^2 + a1 x + a0, closed form.

    Degenerate leading coefficients demote the degree.  Roots get two
    Newton polish steps to tighten the trigonometric/Cardano results."""
    if abs(a3) < DEGENERATE_COEFF:
        if abs(a2) < DEGENERATE_COEFF:
            if abs(a1) < DEGENERATE_COEFF:
                return []
            return [-a0 / a1]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        return [(-a1 - sq) / (2.0 * a2), (-a1 + sq) / (2.0 * a2)]
    b, c, d = a2 / a3, a1 / a3, a0 / a3
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    shift = -b / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        sq = math.sqrt(disc)
        y = _cbrt(-q / 2.0 + sq) + _cbrt(-q / 2.0 - sq)
        roots = [y + shift]
    elif p == 0.0:  # triple root
        roots = [_cbrt(-q) + shift]
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        theta = math.acos(max(-1.0, min(1.0, 3.0 * q / (p * m))))
        roots = [m * math.cos((theta - 2.0 * math.pi * k) / 3.0) + shift
                 for k in range(3)]
    polished = []
    for x in roots:
        for _ in range(2):
            f = ((a3 * x + a2) * x + a1) * x + a0
            df = (3.0 * a3 * x + 2.0 * a2) * x + a1
            if abs(df) > DEGENERATE_COEFF:
                x -= f / df
        polished.append(x)
    return polished


def _least_positive(roots) -> float:
    best = INF
    for r in roots:
        if r > GRID_EPS and r < best:
            best = r
    return best


def predict_trigger_times(
    xi: CavState,
    nb: NeighborView,
    u_new: float,
    g: GainConfig,
    lim: VehicleLimits,
    t_now: float,
    compat_coeffs: bool = False,
) -> Tuple[float, float, float, float]:
    """First future instants each original safety row would reach zero,
    holding u_new and the neighbors' current accelerations constant.

    Returns (ceiling, floor, rear-end, merge) times in absolute seconds;
    +inf where the row can never reach zero (or the neighbor is absent).
    The rear-end row is exactly quadratic and the merge row exactly cubic
    in the elapsed time, so roots are closed-form."""
    u = u_new
    # speed ceiling: -u + k3*(v_max - v - u*tau) = 0, decays only if u > 0
    if u > 0.0:
        t1 = t_now + (-u + g.k3 * lim.v_max - g.k3 * xi.v) / (g.k3 * u)
    else:
        t1 = INF
    # speed floor: u + k4*(v + u*tau - v_min) = 0, decays only if u < 0
    if u < 0.0:
        t2 = t_now + (-u + g.k4 * lim.v_min - g.k4 * xi.v) / (g.k4 * u)
    else:
        t2 = INF
    t3 = INF
    if nb.ip is not None:
        du = nb.ip.u - u
        dv = nb.ip.v - xi.v
        c_now = dv - g.phi * u + g.k1 * b1(xi, nb.ip, g)
        roots = _cubic_real_roots(0.0, g.k1 * 0.5 * du,
                                  du + g.k1 * (dv - g.phi * u), c_now)
        tau = _least_positive(roots)
        t3 = t_now + tau if math.isfinite(tau) else INF
    t4 = INF
    if nb.ic is not None:
        du = nb.ic.u - u
        dv = nb.ic.v - xi.v
        r = g.phi / g.L
        c_now = (dv - r * xi.v * xi.v - r * xi.x * u
                 + g.k2 * b2(xi, nb.ic, g))
        if compat_coeffs:
            k = g.k2
            a3 = -k * 0.5 * r * u * u
            a2 = 0.5 * du - k * 1.5 * r * u * u - k * 1.5 * r * xi.v * u
            a1 = k * (du - 3.0 * r * xi.v * u
                      + dv - r * xi.v * xi.v - r * u * xi.x)
        else:
            a3 = -g.k2 * 0.5 * r * u * u
            a2 = -1.5 * r * u * u + 0.5 * g.k2 * du - g.k2 * 1.5 * r * xi.v * u
            a1 = (du - 3.0 * r * xi.v * u
                  + g.k2 * (dv - r * xi.v * xi.v - r * u * xi.x))
        tau = _least_positive(_cubic_real_roots(a3, a2, a1, c_now))
        t4 = t_now + tau if math.isfinite(tau) else INF
    return t1, t2, t3, t4


def next_instant(
    t_candidates: Tuple[float, ...],
    t_now: float,
    tc: TriggerConfig,
    t_ip_next: float = INF,
    t_ic_next: float = INF,
) -> Tuple[float, bool]:
    """Pick the next solve instant from predicted violation times.

    The earliest violation time (capped by T_max) is used directly when it
    precedes every neighbor's next solve; otherwise the solve lands one
    dwell after the earliest neighbor solve, since the prediction is
    invalidated by that neighbor's unknown new control.  The result is
    snapped down onto the T_d grid and never scheduled before t_now + T_d.
    The flag reports the result coinciding with a neighbor's instant; that
    solve must assume worst-case neighbor accelerations and the solve
    after it is scheduled one dwell later without prediction."""
    t_min = min(min(t_candidates), t_now + tc.T_max)
    r_min = min(t_ip_next, t_ic_next)
    t_next = t_min if t_min <= r_min else r_min + tc.T_d
    t_next = math.floor(t_next / tc.T_d + GRID_EPS) * tc.T_d
    t_next = max(t_next, t_now + tc.T_d)
    worst_case = (abs(t_next - t_ip_next) < GRID_EPS
                  or abs(t_next - t_ic_next) < GRID_EPS)
    return t_next, worst_case
