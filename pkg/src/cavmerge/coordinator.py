"""Central information-exchange tables (no control authority).

The coordinator keeps one row per vehicle in first-in-first-out order: the
vehicle at the head of the queue reaches the merge point first, and every
index shifts down by one when it crosses.  The crossed vehicle is kept one
more generation as index 0 — it coasts beyond the merge point and may still
constrain the (new) head-of-queue vehicle through the merge-gap row — and is
dropped for good on the next crossing.

Rows store the last uploaded state (x, v, u, t), the scheduled next solve
instant for self-triggered vehicles, and — for event-triggered vehicles —
the snapshots of the relevant neighbors taken at the owner's last solve
(these are the anchors of the neighbor deviation boxes).  All reads go
through snapshot/extrapolation calls that are counted, so a run can audit
that no controller bypassed the coordinator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .core_model import Lane, NeighborView, StateSnapshot

COASTER_ID = 0  # queue slot of the most recently crossed vehicle


@dataclass
class CoordinatorRecord:
    """One table row: last uploaded state plus scheme-specific extras."""

    id: int
    lane: Lane
    t_last: float   # [s] time of the stored state
    x_last: float   # [m]
    v_last: float   # [m/s]
    u_last: float   # [m/s^2] control held since t_last
    t_next: float = math.inf  # [s] scheduled solve (self-triggered only)
    # relevant CAV id -> (x, v) captured at this row's t_last (event-triggered
    # only); these are the anchors of the owner's neighbor deviation boxes
    relevant_snapshots: Dict[int, Tuple[float, float]] = field(
        default_factory=dict)


@dataclass(frozen=True)
class Message:
    """A counted communication: kind in {upload, download, sync_request,
    notification}; src/dst use vehicle queue ids, -1 for the coordinator."""

    kind: str
    src: int
    dst: int
    t: float


@dataclass
class MessageCounts:
    uploads: int = 0
    downloads: int = 0
    sync_requests: int = 0
    notifications: int = 0

    @property
    def total(self) -> int:
        return (self.uploads + self.downloads + self.sync_requests
                + self.notifications)


def propagate_forward(rec: CoordinatorRecord, t: float) -> Tuple[float, float]:
    """Extrapolate a row to time t under its held control (exact for the
    noise-free double integrator)."""
    if t < rec.t_last - 1e-12:
        raise ValueError(f"cannot extrapolate backwards: t={t} < {rec.t_last}")
    dt = t - rec.t_last
    x = rec.x_last + dt * rec.v_last + 0.5 * dt * dt * rec.u_last
    v = rec.v_last + dt * rec.u_last
    return x, v


class Coordinator:
    """Serialized table service: every mutation happens in global-time order
    and every read hands out an immutable snapshot."""

    def __init__(self) -> None:
        self._active: List[CoordinatorRecord] = []  # slot k holds id k+1
        self._coaster: Optional[CoordinatorRecord] = None
        self.counts = MessageCounts()
        self.log: List[Message] = []

    # -- introspection ------------------------------------------------------

    @property
    def n_active(self) -> int:
        return len(self._active)

    def active_ids(self) -> List[int]:
        return [r.id for r in self._active]

    def has_coaster(self) -> bool:
        return self._coaster is not None

    def record(self, cav_id: int) -> CoordinatorRecord:
        if cav_id == COASTER_ID:
            if self._coaster is None:
                raise KeyError("no coasting vehicle on record")
            return self._coaster
        if not 1 <= cav_id <= len(self._active):
            raise KeyError(f"no active vehicle with id {cav_id}")
        return self._active[cav_id - 1]

    # -- queue maintenance --------------------------------------------------

    def admit(self, v0: float, lane: Lane, t: float) -> int:
        """Register an arrival at the zone entry; returns its queue id
        (count of vehicles ahead plus one)."""
        cav_id = len(self._active) + 1
        self._active.append(CoordinatorRecord(
            id=cav_id, lane=lane, t_last=t, x_last=0.0, v_last=v0, u_last=0.0))
        self._count(Message("upload", cav_id, -1, t))
        return cav_id

    def retire(self, t: float, x_cross: float, v_cross: float) -> List[int]:
        """Head of queue crossed the merge point: drop the previous coaster,
        turn vehicle 1 into coaster 0 (holding zero control), and shift every
        other id down by one.

        Returns the (post-shift) ids whose constraint structure changed and
        should re-solve under the event-triggered scheme: the crossed
        vehicle's same-lane follower, plus the new head of queue when the
        crossed vehicle is on the other lane (its merge partner became the
        coaster)."""
        if not self._active:
            raise RuntimeError("retire with an empty queue")
        head = self._active.pop(0)
        exit_lane = head.lane
        self._coaster = CoordinatorRecord(
            id=COASTER_ID, lane=exit_lane, t_last=t,
            x_last=x_cross, v_last=v_cross, u_last=0.0)
        for rec in self._active:
            rec.id -= 1
            if rec.relevant_snapshots:
                rec.relevant_snapshots = {
                    j - 1: snap for j, snap in rec.relevant_snapshots.items()
                    if j >= 1}
        flags: List[int] = []
        for rec in self._active:  # nearest same-lane follower of the exiter
            if rec.lane == exit_lane:
                flags.append(rec.id)
                break
        if self._active and self._active[0].lane != exit_lane:
            if self._active[0].id not in flags:
                flags.append(self._active[0].id)
        return sorted(flags)

    # -- neighbor resolution ------------------------------------------------

    def neighbors(self, cav_id: int) -> Tuple[Optional[int], Optional[int]]:
        """(i_p, i_c) ids for an active vehicle: nearest lower-index active
        vehicle on the same lane, and the immediate queue predecessor when it
        travels on the other lane (the coaster counts as predecessor of the
        head of queue, but never as a same-lane leader — it is beyond the
        merge point, so the rear-end row no longer applies)."""
        me = self.record(cav_id)
        ip: Optional[int] = None
        for j in range(cav_id - 1, 0, -1):
            if self._active[j - 1].lane == me.lane:
                ip = j
                break
        ic: Optional[int] = None
        pred = cav_id - 1
        if pred >= 1:
            if self._active[pred - 1].lane != me.lane:
                ic = pred
        elif self._coaster is not None and self._coaster.lane != me.lane:
            ic = COASTER_ID
        return ip, ic

    # -- counted reads ------------------------------------------------------

    def get_snapshot(self, cav_id: int, t: float) -> StateSnapshot:
        """Serve one vehicle's state extrapolated to t (one download)."""
        rec = self.record(cav_id)
        x, v = propagate_forward(rec, t)
        self._count(Message("download", -1, cav_id, t))
        return StateSnapshot(x=x, v=v, u=rec.u_last, t_last=rec.t_last)

    def neighbor_view(self, cav_id: int, t: float) -> NeighborView:
        """Both neighbors' extrapolated states (one download per neighbor)."""
        ip, ic = self.neighbors(cav_id)
        return NeighborView(
            ip=self.get_snapshot(ip, t) if ip is not None else None,
            ic=self.get_snapshot(ic, t) if ic is not None else None)

    # -- writes and push notifications --------------------------------------

    def update_record(
        self,
        cav_id: int,
        t: float,
        x: float,
        v: float,
        u: float,
        t_next: Optional[float] = None,
        relevant_snapshots: Optional[Dict[int, Tuple[float, float]]] = None,
    ) -> None:
        """Store a vehicle's freshly solved state/control (one upload)."""
        rec = self.record(cav_id)
        if t < rec.t_last - 1e-12:
            raise ValueError("row times must be nondecreasing")
        rec.t_last = t
        rec.x_last, rec.v_last, rec.u_last = x, v, u
        if t_next is not None:
            if t_next <= t:
                raise ValueError("t_next must lie strictly after t_last")
            rec.t_next = t_next
        if relevant_snapshots is not None:
            rec.relevant_snapshots = dict(relevant_snapshots)
        self._count(Message("upload", cav_id, -1, t))

    def sync_refresh(self, cav_id: int, t: float, x: float, v: float) -> None:
        """Response leg of a sync request: the queried vehicle reports its
        current state, which replaces the stored kinematics (the held control
        is unchanged).  Not counted separately — the round trip is covered by
        the single sync_request message."""
        rec = self.record(cav_id)
        if t < rec.t_last - 1e-12:
            raise ValueError("row times must be nondecreasing")
        rec.t_last = t
        rec.x_last, rec.v_last = x, v

    def notify(self, updater_id: int, t: float) -> List[Message]:
        """Push side of an event-triggered solve by updater_id.

        Emits one sync request when the updater has neighbors to pull (the
        served states are counted as downloads when actually read), plus one
        notification to every other vehicle whose relevant set contains the
        updater — their stored snapshot of it just went stale, so they must
        re-solve.  The returned list is what the engine adds to the per-run
        communication count."""
        out: List[Message] = []
        ip, ic = self.neighbors(updater_id)
        if ip is not None or ic is not None:
            out.append(Message("sync_request", updater_id, -1, t))
        for rec in self._active:
            if rec.id == updater_id:
                continue
            jp, jc = self.neighbors(rec.id)
            if updater_id in (jp, jc):
                out.append(Message("notification", -1, rec.id, t))
        for m in out:
            self._count(m)
        return out

    # -- internals -----------------------------------------------------------

    def _count(self, m: Message) -> None:
        self.log.append(m)
        if m.kind == "upload":
            self.counts.uploads += 1
        elif m.kind == "download":
            self.counts.downloads += 1
        elif m.kind == "sync_request":
            self.counts.sync_requests += 1
        else:
            self.counts.notifications += 1
