"""Event-triggered control: state boxes, box-minimized rows, trigger tests.

Between communication events each vehicle is only known to its neighbors up
to a box around the last published anchor (half-widths s_x, s_v).  A control
computed at an event therefore has to satisfy every safety row for *all*
states the vehicles could occupy while no new event fires.  That is done by
replacing each row's drift and margin terms with their minimum over the box
intersection with the original feasible region, and picking the control
coefficient's worst end per the sign of a nominal solution.

Events are detected at discrete sensor samples (20 Hz): a vehicle leaving
its own anchor box re-triggers itself and everyone who depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .core_model import (
    CavState,
    GainConfig,
    NeighborView,
    VehicleLimits,
    clf_terms,
)
from .ocbf_controller import build_rows
from .qp_solver import QpProblem, solve
from .ref_trajectory import ReferenceSolution, ref_control, ref_speed

GRID_N = 33  # exhaustive-evaluation resolution per axis for the merge row


class EmptyIntersection(Exception):
    """The anchor box shares no point with the original feasible set."""


@dataclass(frozen=True)
class BoundSet:
    """Anchor box promised to neighbors: state stays within +-s of anchor."""

    s_x: float  # m, position half-width
    s_v: float  # m/s, speed half-width
    anchor_x: float
    anchor_v: float
    anchor_time: float

    def exceeded(self, x: float, v: float) -> bool:
        """True once the true state reaches or crosses the box boundary."""
        return (abs(x - self.anchor_x) >= self.s_x
                or abs(v - self.anchor_v) >= self.s_v)

    def re_anchored(self, x: float, v: float, t: float) -> "BoundSet":
        return replace(self, anchor_x=x, anchor_v=v, anchor_time=t)


@dataclass(frozen=True)
class NeighborBounds:
    """Anchor boxes of the up-to-two constraining vehicles."""

    ip: Optional[BoundSet] = None
    ic: Optional[BoundSet] = None


@dataclass(frozen=True)
class MinimizedRow:
    """Worst-case decomposition of one safety row over the anchor boxes."""

    bmin_f: float      # lower bound of the drift term
    bmin_gamma: float  # lower bound of the class-K margin term
    bmin_g: float      # control coefficient at its worst box end

    def as_row(self) -> Tuple[float, float, float]:
        return (self.bmin_g, 0.0, self.bmin_f + self.bmin_gamma)


@dataclass(frozen=True)
class TriggerEvent:
    """A sampled boundary crossing requiring CAV cav_id to re-solve.

    kind "own_box": the vehicle left its own anchor box.  kind
    "neighbor_box": the vehicle identified by source_id left *its* box, so
    cav_id's cached worst-case rows are no longer valid.
    """

    cav_id: int
    kind: str  # "own_box" | "neighbor_box"
    source_id: Optional[int] = None


def min_bounds(lim: VehicleLimits, T_s: float) -> Tuple[float, float]:
    """Smallest detectable half-widths for a sampling period T_s.

    Anything smaller can be jumped over between two consecutive samples by
    a vehicle moving at the speed cap / accelerating at the actuation cap.
    """
    if T_s <= 0.0:
        raise ValueError(f"sampling period must be positive, got {T_s}")
    return lim.v_max * T_s, max(lim.u_max, abs(lim.u_min)) * T_s


def _own_box(b: BoundSet, g: GainConfig, lim: VehicleLimits):
    x_lo, x_hi = max(0.0, b.anchor_x - b.s_x), min(g.L, b.anchor_x + b.s_x)
    v_lo, v_hi = (max(lim.v_min, b.anchor_v - b.s_v),
                  min(lim.v_max, b.anchor_v + b.s_v))
    if x_lo > x_hi or v_lo > v_hi:
        raise EmptyIntersection("own box outside the zone or speed band")
    return x_lo, x_hi, v_lo, v_hi


def _neighbor_box(b: BoundSet, lim: VehicleLimits):
    # no upper position clamp: a vehicle just past the merge point still
    # constrains its followers while it remains in the neighbor set
    x_lo, x_hi = max(0.0, b.anchor_x - b.s_x), b.anchor_x + b.s_x
    v_lo, v_hi = (max(lim.v_min, b.anchor_v - b.s_v),
                  min(lim.v_max, b.anchor_v + b.s_v))
    if v_lo > v_hi:
        raise EmptyIntersection("neighbor speed box outside the band")
    return x_lo, x_hi, v_lo, v_hi


def _grid_min_2d(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_rng: Tuple[float, float],
    v_rng: Tuple[float, float],
    n: int = GRID_N,
) -> float:
    """Exhaustive minimum on an n x n grid plus one bisection-style refine:
    the cell neighbourhood of the coarse argmin is re-gridded once."""
    xs = np.linspace(x_rng[0], x_rng[1], n)
    vs = np.linspace(v_rng[0], v_rng[1], n)
    X, V = np.meshgrid(xs, vs, indexing="ij")
    vals = fn(X, V)
    flat = int(np.argmin(vals))
    i, j = divmod(flat, n)
    best = float(vals.flat[flat])
    dx = xs[1] - xs[0] if n > 1 else 0.0
    dv = vs[1] - vs[0] if n > 1 else 0.0
    xs2 = np.linspace(max(x_rng[0], xs[i] - dx), min(x_rng[1], xs[i] + dx), n)
    vs2 = np.linspace(max(v_rng[0], vs[j] - dv), min(v_rng[1], vs[j] + dv), n)
    X2, V2 = np.meshgrid(xs2, vs2, indexing="ij")
    return min(best, float(np.min(fn(X2, V2))))


def rear_end_min_row(
    bounds_i: BoundSet,
    bounds_ip: BoundSet,
    g: GainConfig,
    lim: VehicleLimits,
) -> MinimizedRow:
    """Worst-case rear-end row over both boxes; everything here is affine,
    so each term's minimum sits at a box corner."""
    xi_lo, xi_hi, vi_lo, vi_hi = _own_box(bounds_i, g, lim)
    xp_lo, xp_hi, vp_lo, vp_hi = _neighbor_box(bounds_ip, lim)
    # feasibility of box n original set: the *best* corner must clear zero
    if xp_hi - xi_lo - g.phi * vi_lo - g.delta < 0.0:
        raise EmptyIntersection("rear-end margin negative over entire box")
    f_min = vp_lo - vi_hi
    gamma_min = g.k1 * max(0.0, xp_lo - xi_hi - g.phi * vi_hi - g.delta)
    return MinimizedRow(bmin_f=f_min, bmin_gamma=gamma_min, bmin_g=-g.phi)


def merge_min_row(
    bounds_i: BoundSet,
    bounds_ic: BoundSet,
    g: GainConfig,
    lim: VehicleLimits,
    u_sign_hint: float,
) -> MinimizedRow:
    """Worst-case merge row; the progress-ramped headway makes the margin
    bilinear in (x_i, v_i) and the drift quadratic in v_i, so those terms
    are minimized by exhaustive grid evaluation over the own box."""
    xi_lo, xi_hi, vi_lo, vi_hi = _own_box(bounds_i, g, lim)
    xc_lo, xc_hi, vc_lo, vc_hi = _neighbor_box(bounds_ic, lim)

    def margin(xg, vg, xc):
        return xc - xg - (g.phi * xg / g.L) * vg - g.delta

    # best case decreases in own x and v: corner check for emptiness
    if margin(xi_lo, vi_lo, xc_hi) < 0.0:
        raise EmptyIntersection("merge margin negative over entire box")
    gamma_min = g.k2 * max(
        0.0, _grid_min_2d(lambda X, V: margin(X, V, xc_lo),
                          (xi_lo, xi_hi), (vi_lo, vi_hi)))
    f_min = _grid_min_2d(
        lambda X, V: vc_lo - V - (g.phi / g.L) * V * V,
        (xi_lo, xi_hi), (vi_lo, vi_hi))
    # control coefficient -phi*x/L <= 0: for u >= 0 the farthest own
    # position is worst; for braking the nearest one gives the least help
    x_pick = xi_hi if u_sign_hint >= 0.0 else xi_lo
    return MinimizedRow(bmin_f=f_min, bmin_gamma=gamma_min,
                        bmin_g=-(g.phi * x_pick) / g.L)


def speed_band_min_rows(
    bounds_i: BoundSet,
    g: GainConfig,
    lim: VehicleLimits,
) -> Tuple[MinimizedRow, MinimizedRow]:
    """Worst-case speed ceiling / floor rows (drift terms are zero)."""
    _, _, vi_lo, vi_hi = _own_box(bounds_i, g, lim)
    ceiling = MinimizedRow(bmin_f=0.0,
                           bmin_gamma=g.k3 * max(0.0, lim.v_max - vi_hi),
                           bmin_g=-1.0)
    floor = MinimizedRow(bmin_f=0.0,
                         bmin_gamma=g.k4 * max(0.0, vi_lo - lim.v_min),
                         bmin_g=1.0)
    return ceiling, floor


def box_min_rows(
    xi: CavState,
    nb: NeighborView,
    bounds_i: BoundSet,
    bounds_nb: NeighborBounds,
    g: GainConfig,
    lim: VehicleLimits,
    u_sign_hint: float = 0.0,
    v_ref: Optional[float] = None,
    u_ref: float = 0.0,
) -> QpProblem:
    """Assemble the worst-case QP valid for every state in the anchor boxes.

    Same row order as the nominal assembly: rear-end, merge, ceiling,
    floor, actuation caps, tracking.  The caller must have re-anchored
    bounds_i at xi (the own box is centred on the current state).
    """
    rows: List[Tuple[float, float, float]] = []
    if nb.ip is not None:
        assert bounds_nb.ip is not None
        rows.append(rear_end_min_row(bounds_i, bounds_nb.ip, g, lim).as_row())
    if nb.ic is not None:
        assert bounds_nb.ic is not None
        rows.append(merge_min_row(bounds_i, bounds_nb.ic, g, lim,
                                  u_sign_hint).as_row())
    ceiling, floor = speed_band_min_rows(bounds_i, g, lim)
    rows.append(ceiling.as_row())
    rows.append(floor.as_row())
    rows.append((-1.0, 0.0, lim.u_max))
    rows.append((1.0, 0.0, -lim.u_min))
    if v_ref is not None:
        cu, const, _ = clf_terms(xi, v_ref, g)
        rows.append((-cu, 1.0, -const))
    return QpProblem(u_ref=u_ref, relax_weight=g.relax_weight, rows=rows)


def detect_event(
    states: Dict[int, CavState],
    bounds: Dict[int, BoundSet],
    neighbor_ids: Dict[int, Tuple[Optional[int], Optional[int]]],
) -> List[TriggerEvent]:
    """Sweep one sensor sample and list every required re-solve.

    A vehicle crossing its own anchor box fires for itself and for every
    vehicle that lists it as a neighbor.  Output is deterministic:
    ascending cav_id, own-box entries before neighbor-box ones.
    """
    crossed = [cid for cid, st in sorted(states.items())
               if cid in bounds and bounds[cid].exceeded(st.x, st.v)]
    crossed_set = set(crossed)
    events: List[TriggerEvent] = []
    for cid in sorted(states):
        if cid in crossed_set:
            events.append(TriggerEvent(cav_id=cid, kind="own_box"))
        ip_id, ic_id = neighbor_ids.get(cid, (None, None))
        for rid in (ip_id, ic_id):
            if rid is not None and rid in crossed_set:
                events.append(TriggerEvent(cav_id=cid, kind="neighbor_box",
                                           source_id=rid))
    return events


def event_qp(
    xi: CavState,
    nb: NeighborView,
    bounds_i: BoundSet,
    bounds_nb: NeighborBounds,
    g: GainConfig,
    lim: VehicleLimits,
    ref: ReferenceSolution,
    t_since_entry: float,
    fallback_u: Optional[float] = None,
) -> Tuple[float, bool]:
    """One triggered control update: returns (u, feasible).

    Two passes: the nominal point-state QP supplies the sign hint for the
    merge row's control coefficient (skipped when there is no conflicting
    vehicle), then the worst-case QP over the anchor boxes is solved.  An
    empty box intersection counts as an infeasible case.  The caller is
    responsible for re-anchoring the vehicle's box at this same instant.
    """
    fallback = lim.u_min if fallback_u is None else fallback_u
    u_ref = ref_control(ref, t_since_entry, lim)
    v_ref = (ref_speed(ref, t_since_entry, lim)
             if t_since_entry <= ref.tf else None)
    hint = 0.0
    if nb.ic is not None:
        nominal = solve(build_rows(xi, nb, g, lim, v_ref, u_ref=u_ref))
        if nominal.status == "feasible":
            hint = nominal.u
    try:
        problem = box_min_rows(xi, nb, bounds_i, bounds_nb, g, lim,
                               u_sign_hint=hint, v_ref=v_ref, u_ref=u_ref)
    except EmptyIntersection:
        return fallback, False
    sol = solve(problem)
    if sol.status != "feasible":
        return fallback, False
    return sol.u, True
