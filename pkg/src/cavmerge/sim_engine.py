"""Closed-loop simulation: arrivals, scheme dispatch, integration, metrics.

One run advances an integer tick clock at the sensor period T_s (20 Hz by
default); every quantity that must land on a time grid (control periods,
dwell times, arrival instants) is validated to be an integer multiple of
T_s, so grid membership is exact integer arithmetic, never float modulo.

Tick phases, in order:
  (a) exits — the head of the queue crossed the merge point during the last
      step; its crossing time/speed are linearly interpolated, indices shift,
      and it coasts on as queue slot 0 for one more generation;
  (b) arrivals — generated from per-lane Poisson processes (or an explicit
      schedule) and held at the origin with frozen speed while the rear-end
      margin against the would-be leader is negative;
  (c) recording — rear-end / merge gap values of every active vehicle are
      sampled for the constraint traces, and the event-triggered scheme scans
      all deviation boxes;
  (d) control — scheme-specific: fixed-period re-solves, the event worklist
      (box crossings chain through sync re-anchors, each vehicle solving at
      most once per tick), or the self-triggered schedule with reads taken
      before any same-instant writes so simultaneous solvers cannot see each
      other's fresh controls;
  (e) dynamics — every vehicle (coaster included) advances one tick under
      its held control, with process noise integrated in redrawn substeps
      when enabled.

Controls are owned by the vehicles; the coordinator only stores and serves
information, and every neighbor state consumed by a controller is served
through it, which is what makes the message audit meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_model import (
    CavState,
    GainConfig,
    Lane,
    NeighborView,
    StateSnapshot,
    VehicleLimits,
    b1 as rear_gap,
    b2 as merge_gap,
    step_dynamics,
)
from .coordinator import COASTER_ID, Coordinator, MessageCounts
from .event_triggered import (
    BoundSet,
    NeighborBounds,
    detect_event,
    event_qp,
    min_bounds,
)
from .ocbf_controller import time_driven_step
from .ref_trajectory import (
    NoConvergence,
    ReferenceSolution,
    coasting_reference,
    solve_reference,
)
from .self_triggered import (
    TriggerConfig,
    next_instant,
    predict_trigger_times,
    self_triggered_qp,
)

SCHEMES = ("time_driven", "event_triggered", "self_triggered")


class ConfigError(ValueError):
    """A scenario configuration violates a structural invariant."""


@dataclass(frozen=True)
class FuelCoefficients:
    """Polynomial fuel-rate model: cruise cubic in speed plus an
    acceleration term active only for u > 0.  Default values are the
    published calibration of the cited consumption model (external
    provenance — not derived in this package)."""

    w0: float = 0.1569
    w1: float = 2.450e-2
    w2: float = -7.415e-4
    w3: float = 5.975e-5
    r0: float = 0.07224
    r1: float = 0.09681
    r2: float = 1.075e-3


def fuel_rate(v: float, u: float, coeffs: FuelCoefficients) -> float:
    """Instantaneous fuel consumption [1/s]; braking adds no fuel."""
    c = coeffs
    cruise = c.w0 + c.w1 * v + c.w2 * v * v + c.w3 * v * v * v
    accel = (c.r0 + c.r1 * v + c.r2 * v * v) * max(u, 0.0)
    return cruise + accel


@dataclass(frozen=True)
class Arrival:
    """One scheduled zone entry (time is snapped up to the tick grid)."""

    t: float
    lane: Lane
    v0: float


# Deterministic 12-vehicle demonstration scenario: alternating-lane platoon
# with entry speeds inside the random-draw band, dense enough that rear-end
# and merge rows genuinely bind near the merge point.
TWELVE_CAV_SCHEDULE: Tuple[Arrival, ...] = (
    Arrival(0.0, Lane.MAIN, 18.0),
    Arrival(0.7, Lane.MERGE, 19.5),
    Arrival(1.6, Lane.MERGE, 16.0),
    Arrival(2.2, Lane.MAIN, 19.0),
    Arrival(3.0, Lane.MAIN, 17.5),
    Arrival(3.6, Lane.MERGE, 20.0),
    Arrival(4.5, Lane.MAIN, 16.5),
    Arrival(5.0, Lane.MERGE, 19.0),
    Arrival(5.8, Lane.MAIN, 18.5),
    Arrival(6.4, Lane.MERGE, 17.0),
    Arrival(7.2, Lane.MAIN, 20.0),
    Arrival(7.8, Lane.MERGE, 15.5),
)


@dataclass
class ScenarioConfig:
    scheme: str = "time_driven"
    arrival_rate: float = 0.1        # [1/s] per lane (Poisson)
    horizon: float = 120.0           # [s]
    seed: int = 0
    limits: VehicleLimits = field(default_factory=lambda: VehicleLimits(
        v_min=0.0, v_max=30.0, u_min=-5.886, u_max=4.905))
    gains: GainConfig = field(default_factory=GainConfig)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    s_x: float = 1.5                 # [m] deviation-box half-width template
    s_v: float = 0.5                 # [m/s]
    T_s: float = 0.05                # [s] sensor/integration period
    dt: float = 0.05                 # [s] fixed re-solve period (time-driven)
    noise_enabled: bool = False
    noise_w1: Tuple[float, float] = (-2.0, 2.0)    # [m/s] on dx/dt
    noise_w2: Tuple[float, float] = (-0.2, 0.2)    # [m/s^2] on dv/dt
    fuel: FuelCoefficients = field(default_factory=FuelCoefficients)
    v0_range: Tuple[float, float] = (15.0, 20.0)   # [m/s] entry-speed draw
    arrival_schedule: Optional[Sequence[Arrival]] = None  # overrides Poisson

    def control_ticks(self) -> int:
        return _exact_multiple(self.dt, self.T_s, "dt")

    def dwell_ticks(self) -> int:
        return _exact_multiple(self.trigger.T_d, self.T_s, "T_d")

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme '{self.scheme}'")
        try:
            self.limits.validate()
            self.gains.validate()
        except ValueError as err:
            raise ConfigError(str(err)) from err
        if self.T_s <= 0:
            raise ConfigError("T_s must be positive")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.arrival_rate < 0:
            raise ConfigError("arrival_rate must be nonnegative")
        if self.v0_range[0] > self.v0_range[1] or self.v0_range[0] <= 0:
            raise ConfigError("v0_range must be positive and ordered")
        for lo, hi in (self.noise_w1, self.noise_w2):
            if lo > hi:
                raise ConfigError("noise ranges must be ordered lo <= hi")
        if self.scheme == "time_driven":
            self.control_ticks()
        if self.scheme == "self_triggered":
            try:
                self.trigger.validate()
            except ValueError as err:
                raise ConfigError(str(err)) from err
            self.dwell_ticks()
            _exact_multiple(self.trigger.T_max, self.trigger.T_d, "T_max")
        if self.scheme == "event_triggered":
            sx_min, sv_min = min_bounds(self.limits, self.T_s)
            if self.s_x < sx_min - 1e-12:
                raise ConfigError(
                    f"s_x={self.s_x} is below the sampling-detectability "
                    f"bound {sx_min} (v_max*T_s): a box this narrow can be "
                    f"jumped over between consecutive samples")
            if self.s_v < sv_min - 1e-12:
                raise ConfigError(
                    f"s_v={self.s_v} is below the sampling-detectability "
                    f"bound {sv_min} (max |u| * T_s)")


def _exact_multiple(value: float, unit: float, name: str) -> int:
    m = round(value / unit)
    if m < 1 or abs(m * unit - value) > 1e-9:
        raise ConfigError(
            f"{name}={value} must be a positive integer multiple of {unit}")
    return m


@dataclass(frozen=True)
class TraceSample:
    """One 20 Hz constraint sample; gap fields are None when the
    corresponding neighbor does not exist."""

    t: float
    uid: int
    b1: Optional[float]
    b2: Optional[float]


@dataclass
class CavMetrics:
    uid: int
    lane: Lane
    t0: float
    tf: Optional[float] = None    # None while still in the zone
    energy: float = 0.0           # 0.5 * integral of u^2
    fuel: float = 0.0
    qp_count: int = 0
    infeasible_count: int = 0

    @property
    def completed(self) -> bool:
        return self.tf is not None

    @property
    def travel_time(self) -> float:
        if self.tf is None:
            raise ValueError("vehicle has not exited")
        return self.tf - self.t0


@dataclass
class RunMetrics:
    cavs: List[CavMetrics] = field(default_factory=list)
    qp_count: int = 0
    infeasible_count: int = 0
    messages: MessageCounts = field(default_factory=MessageCounts)
    snapshot_reads: int = 0       # neighbor states consumed by controllers
    traces: List[TraceSample] = field(default_factory=list)
    solve_log: List[Tuple[int, int]] = field(default_factory=list)  # (tick, uid)
    admitted: int = 0
    exited: int = 0
    in_zone_at_end: int = 0

    def completed(self) -> List[CavMetrics]:
        return [c for c in self.cavs if c.completed]


def objective_value(metrics: RunMetrics, alpha: float,
                    limits: VehicleLimits) -> float:
    """Average per-vehicle convex combination of travel time and energy
    normalized by the worst-case kinetic control cost (completed only)."""
    done = metrics.completed()
    if not done:
        raise ValueError("no completed vehicles to evaluate")
    norm = 0.5 * max(limits.u_max ** 2, limits.u_min ** 2)
    vals = [alpha * c.travel_time + (1.0 - alpha) * c.energy / norm
            for c in done]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# run internals
# ---------------------------------------------------------------------------

@dataclass
class _Agent:
    uid: int
    state: CavState              # true world state; state.id = queue slot
    ref: ReferenceSolution
    entry_time: float
    entry_tick: int
    metrics: CavMetrics
    prev_x: float = 0.0          # state at the previous tick (for crossing
    prev_v: float = 0.0          # interpolation under any noise realization)
    next_tick: int = 0           # self-triggered: scheduled solve tick


def _draw_arrivals(cfg: ScenarioConfig) -> List[Arrival]:
    """Poisson streams per lane, or the explicit schedule verbatim."""
    if cfg.arrival_schedule is not None:
        return sorted(cfg.arrival_schedule,
                      key=lambda a: (a.t, a.lane != Lane.MAIN))
    out: List[Arrival] = []
    root = np.random.default_rng(cfg.seed)
    streams = root.spawn(2)
    if cfg.arrival_rate > 0:
        for lane, stream in zip((Lane.MAIN, Lane.MERGE), streams):
            t = 0.0
            while True:
                t += float(stream.exponential(1.0 / cfg.arrival_rate))
                if t >= cfg.horizon:
                    break
                v0 = float(stream.uniform(*cfg.v0_range))
                out.append(Arrival(t, lane, v0))
    return sorted(out, key=lambda a: (a.t, a.lane != Lane.MAIN))


def _reference_for(v0: float, g: GainConfig) -> ReferenceSolution:
    if g.beta == 0.0:
        return coasting_reference(v0, g.L)
    try:
        return solve_reference(v0, g.L, g.beta)
    except NoConvergence:
        return coasting_reference(v0, g.L)


class _Run:
    """Mutable state of one run; `execute` drives the tick loop."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.coord = Coordinator()
        self.agents: List[_Agent] = []        # active, index k = queue id k+1
        self.coaster: Optional[_Agent] = None
        self.boxes: Dict[int, BoundSet] = {}  # event scheme deviation boxes
        self.metrics = RunMetrics()
        # child streams 0 and 1 are the per-lane arrival draws (consumed in
        # _draw_arrivals from an identically seeded root, so arrivals match
        # across schemes at equal seed); child 2 is process noise
        self.noise_rng = np.random.default_rng(cfg.seed).spawn(3)[2]
        self.pending: Dict[Lane, List[Arrival]] = {
            Lane.MAIN: [], Lane.MERGE: []}
        for a in _draw_arrivals(cfg):
            self.pending[a.lane].append(a)
        self.uid_counter = 0
        self.m1 = cfg.control_ticks() if cfg.scheme == "time_driven" else 1
        self.m2 = cfg.dwell_ticks() if cfg.scheme == "self_triggered" else 1

    # -- helpers ------------------------------------------------------------

    def _agent(self, cav_id: int) -> _Agent:
        if cav_id == COASTER_ID:
            assert self.coaster is not None
            return self.coaster
        return self.agents[cav_id - 1]

    def _true_nb(self, cav_id: int) -> Tuple[Optional[int], Optional[int]]:
        return self.coord.neighbors(cav_id)

    def _noise(self):
        if not self.cfg.noise_enabled:
            return None
        return (self.cfg.noise_w1, self.cfg.noise_w2)

    # -- phase (a): exits -----------------------------------------------------

    def _process_exits(self, t: float) -> List[int]:
        """Head-of-queue crossings; returns event-scheme re-solve flags."""
        flags: List[int] = []
        g = self.cfg.gains
        while self.agents and self.agents[0].state.x >= g.L:
            head = self.agents.pop(0)
            st = head.state
            # crossing happened during the last step: interpolate linearly
            span = st.x - head.prev_x
            theta = (g.L - head.prev_x) / span if span > 0 else 1.0
            theta = min(max(theta, 0.0), 1.0)
            tf = (t - self.cfg.T_s) + theta * self.cfg.T_s
            v_cross = head.prev_v + theta * (st.v - head.prev_v)
            m = head.metrics
            m.tf = tf
            # roll back the post-crossing remainder of the last tick
            rest = (1.0 - theta) * self.cfg.T_s
            m.energy -= 0.5 * st.u * st.u * rest
            m.fuel -= 0.5 * (fuel_rate(v_cross, st.u, self.cfg.fuel)
                             + fuel_rate(st.v, st.u, self.cfg.fuel)) * rest
            self.metrics.exited += 1
            new_flags = self.coord.retire(t, st.x, st.v)
            # the crossed vehicle coasts on as queue slot 0
            st.id = COASTER_ID
            st.u = 0.0
            st.t_next = math.inf
            self.coaster = head
            for ag in self.agents:
                ag.state.id -= 1
            if self.cfg.scheme == "event_triggered":
                self.boxes = {cid - 1: b for cid, b in self.boxes.items()
                              if cid >= 1}
                # flags collected before this retirement refer to the old
                # numbering: shift them down with everyone else
                flags = [f - 1 for f in flags if f >= 2]
                flags.extend(new_flags)
        return sorted(set(flags))

    # -- phase (b): arrivals ---------------------------------------------------

    def _process_arrivals(self, tick: int, t: float) -> List[int]:
        """Admit every due arrival whose entry is safe; hold the rest at the
        origin with frozen speed.  Self-triggered entries wait for the dwell
        grid so all solve instants stay on it."""
        admitted: List[int] = []
        if self.cfg.scheme == "self_triggered" and tick % self.m2 != 0:
            return admitted
        for lane in (Lane.MAIN, Lane.MERGE):
            queue = self.pending[lane]
            while queue and queue[0].t <= t + 1e-9:
                arr = queue[0]
                leader = None
                for ag in reversed(self.agents):
                    if ag.state.lane == lane:
                        leader = ag
                        break
                if leader is not None:
                    g = self.cfg.gains
                    slack = (leader.state.x - g.phi * arr.v0 - g.delta)
                    if slack < 0.0:
                        break  # held at origin; lane queue stays FIFO
                queue.pop(0)
                cav_id = self.coord.admit(arr.v0, lane, t)
                self.uid_counter += 1
                st = CavState(id=cav_id, lane=lane, x=0.0, v=arr.v0,
                              u=0.0, t_last=t)
                agent = _Agent(
                    uid=self.uid_counter, state=st,
                    ref=_reference_for(arr.v0, self.cfg.gains),
                    entry_time=t, entry_tick=tick,
                    metrics=CavMetrics(uid=self.uid_counter, lane=lane, t0=t),
                    prev_x=0.0, prev_v=arr.v0, next_tick=tick)
                self.agents.append(agent)
                self.metrics.cavs.append(agent.metrics)
                self.metrics.admitted += 1
                admitted.append(cav_id)
        return admitted

    # -- phase (c): traces and event detection --------------------------------

    def _record_traces(self, t: float) -> None:
        for ag in self.agents:
            ip_id, ic_id = self._true_nb(ag.state.id)
            b1v = b2v = None
            if ip_id is not None:
                lead = self._agent(ip_id).state
                b1v = rear_gap(ag.state, StateSnapshot(
                    x=lead.x, v=lead.v, u=lead.u, t_last=t), self.cfg.gains)
            if ic_id is not None:
                conf = self._agent(ic_id).state
                b2v = merge_gap(ag.state, StateSnapshot(
                    x=conf.x, v=conf.v, u=conf.u, t_last=t), self.cfg.gains)
            self.metrics.traces.append(
                TraceSample(t=t, uid=ag.uid, b1=b1v, b2=b2v))

    def _detect_box_events(self) -> List[int]:
        states = {ag.state.id: ag.state for ag in self.agents}
        if self.coaster is not None:
            states[COASTER_ID] = self.coaster.state
        neighbor_ids = {ag.state.id: self._true_nb(ag.state.id)
                        for ag in self.agents}
        events = detect_event(states, self.boxes, neighbor_ids)
        return sorted({e.cav_id for e in events})

    # -- phase (d): control ----------------------------------------------------

    def _nb_presence_reads(self, nv: NeighborView) -> int:
        return (nv.ip is not None) + (nv.ic is not None)

    def _control_time_driven(self, tick: int, t: float) -> None:
        due = [ag for ag in self.agents
               if (tick - ag.entry_tick) % self.m1 == 0]
        views = [(ag, self.coord.neighbor_view(ag.state.id, t)) for ag in due]
        for ag, nv in views:   # reads before writes: simultaneous solves
            u, ok = time_driven_step(
                ag.state, nv, self.cfg.gains, self.cfg.limits, ag.ref,
                t - ag.entry_time)
            self.metrics.snapshot_reads += self._nb_presence_reads(nv)
            self._book_solve(ag, tick, ok)
            ag.state.u = u
            self.coord.update_record(ag.state.id, t, ag.state.x, ag.state.v, u)

    def _control_self_triggered(self, tick: int, t: float) -> None:
        due = [ag for ag in self.agents if ag.next_tick == tick]
        gathered = []
        for ag in due:         # all reads against the tick-start rows
            cav_id = ag.state.id
            ip_id, ic_id = self._true_nb(cav_id)
            t_ip = (self.coord.record(ip_id).t_next
                    if ip_id is not None else math.inf)
            t_ic = (self.coord.record(ic_id).t_next
                    if ic_id is not None else math.inf)
            nv = self.coord.neighbor_view(cav_id, t)
            gathered.append((ag, nv, t_ip, t_ic))
        for ag, nv, t_ip, t_ic in gathered:
            # a neighbor re-solving at this same instant makes its fresh
            # control unknowable: assume it can do anything
            wc = (abs(t_ip - t) < 1e-9) or (abs(t_ic - t) < 1e-9)
            u, _e, ok = self_triggered_qp(
                ag.state, nv, self.cfg.gains, self.cfg.limits,
                self.cfg.trigger, ag.ref, t - ag.entry_time,
                worst_case_neighbors=wc)
            self.metrics.snapshot_reads += self._nb_presence_reads(nv)
            self._book_solve(ag, tick, ok)
            ag.state.u = u
            times = predict_trigger_times(
                ag.state, nv, u, self.cfg.gains, self.cfg.limits, t,
                compat_coeffs=self.cfg.trigger.compat_margins)
            t_next, _wc_next = next_instant(
                times, t, self.cfg.trigger, t_ip_next=t_ip, t_ic_next=t_ic)
            ag.next_tick = round(t_next / self.cfg.T_s)
            self.coord.update_record(ag.state.id, t, ag.state.x, ag.state.v,
                                     u, t_next=t_next)

    def _control_event(self, tick: int, t: float, seeds: List[int]) -> None:
        """Worklist of re-solves: box crossings, exit/arrival flags, and the
        chain of re-anchor notifications; each vehicle at most once per tick
        (within a tick states are frozen, so a second solve is idempotent)."""
        pending = set(seeds)
        solved: set = set()
        while pending:
            cav_id = min(pending)
            pending.discard(cav_id)
            if cav_id in solved:
                continue
            solved.add(cav_id)
            if cav_id == COASTER_ID:
                self._coaster_reanchor(t, pending, solved)
                continue
            if cav_id > len(self.agents):
                continue  # stale flag: the vehicle exited this very tick
            ag = self._agent(cav_id)
            st = ag.state
            ip_id, ic_id = self._true_nb(cav_id)
            # sync: the neighbors answer the solver's state request with
            # their true kinematics.  Their promise boxes stay anchored at
            # their own last solve — the rows minimized over those boxes
            # remain valid because a neighbor that had left its box would
            # have been re-solved earlier in this sweep (lower queue index)
            for rid in (ip_id, ic_id):
                if rid is None:
                    continue
                r_st = self._agent(rid).state
                self.coord.sync_refresh(rid, t, r_st.x, r_st.v)
            own = self.boxes.get(cav_id)
            if own is None:
                own = BoundSet(self.cfg.s_x, self.cfg.s_v, st.x, st.v, t)
            else:
                own = own.re_anchored(st.x, st.v, t)
            self.boxes[cav_id] = own
            nv = self.coord.neighbor_view(cav_id, t)  # just-refreshed rows
            nb_boxes = NeighborBounds(
                ip=self.boxes[ip_id] if ip_id is not None else None,
                ic=self.boxes[ic_id] if ic_id is not None else None)
            u, ok = event_qp(st, nv, own, nb_boxes, self.cfg.gains,
                             self.cfg.limits, ag.ref, t - ag.entry_time)
            self.metrics.snapshot_reads += self._nb_presence_reads(nv)
            self._book_solve(ag, tick, ok)
            st.u = u
            snaps = {}
            if nv.ip is not None:
                snaps[ip_id] = (nv.ip.x, nv.ip.v)
            if nv.ic is not None:
                snaps[ic_id] = (nv.ic.x, nv.ic.v)
            self.coord.update_record(cav_id, t, st.x, st.v, u,
                                     relevant_snapshots=snaps)
            for msg in self.coord.notify(cav_id, t):
                if msg.kind == "notification" and msg.dst not in solved:
                    pending.add(msg.dst)

    def _coaster_reanchor(self, t: float, pending: set, solved: set) -> None:
        """The coaster left its box: re-anchor and notify dependents — it has
        no control authority, so no QP is solved."""
        assert self.coaster is not None
        st = self.coaster.state
        self.boxes[COASTER_ID] = self.boxes[COASTER_ID].re_anchored(
            st.x, st.v, t)
        self.coord.update_record(COASTER_ID, t, st.x, st.v, 0.0)
        for msg in self.coord.notify(COASTER_ID, t):
            if msg.kind == "notification" and msg.dst not in solved:
                pending.add(msg.dst)

    def _book_solve(self, ag: _Agent, tick: int, feasible: bool) -> None:
        ag.metrics.qp_count += 1
        self.metrics.qp_count += 1
        self.metrics.solve_log.append((tick, ag.uid))
        if not feasible:
            ag.metrics.infeasible_count += 1
            self.metrics.infeasible_count += 1

    # -- phase (e): dynamics ----------------------------------------------------

    def _step_dynamics(self) -> None:
        noise = self._noise()
        coeffs = self.cfg.fuel
        T_s = self.cfg.T_s
        everyone = ([self.coaster] if self.coaster is not None else []) \
            + self.agents
        for ag in everyone:
            st = ag.state
            ag.prev_x, ag.prev_v = st.x, st.v
            new = step_dynamics(st, st.u, T_s, noise=noise,
                                rng=self.noise_rng if noise else None)
            if ag.state.id != COASTER_ID:
                m = ag.metrics
                m.energy += 0.5 * st.u * st.u * T_s
                m.fuel += 0.5 * (fuel_rate(st.v, st.u, coeffs)
                                 + fuel_rate(new.v, st.u, coeffs)) * T_s
            st.x, st.v = new.x, new.v

    # -- main loop ---------------------------------------------------------------

    def execute(self) -> RunMetrics:
        n_ticks = round(self.cfg.horizon / self.cfg.T_s)
        for tick in range(n_ticks):
            t = tick * self.cfg.T_s
            exit_flags = self._process_exits(t)
            new_ids = self._process_arrivals(tick, t)
            self._record_traces(t)
            if self.cfg.scheme == "time_driven":
                self._control_time_driven(tick, t)
            elif self.cfg.scheme == "self_triggered":
                self._control_self_triggered(tick, t)
            else:
                seeds = sorted(set(
                    self._detect_box_events() + exit_flags + new_ids))
                self._control_event(tick, t, seeds)
            self._step_dynamics()
        self.metrics.in_zone_at_end = len(self.agents)
        self.metrics.messages = self.coord.counts
        return self.metrics


def run(cfg: ScenarioConfig) -> RunMetrics:
    """Execute one seeded, deterministic closed-loop scenario."""
    return _Run(cfg).execute()


def twelve_cav_config(scheme: str, **overrides) -> ScenarioConfig:
    """The deterministic 12-vehicle benchmark: heavy time weight so the
    platoon actually accelerates into its constraints, 60 s horizon."""
    gains = replace(GainConfig(), beta=5.0)
    cfg = ScenarioConfig(scheme=scheme, gains=gains, horizon=60.0,
                         arrival_schedule=TWELVE_CAV_SCHEDULE)
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown scenario field '{key}'")
        setattr(cfg, key, value)
    return cfg
