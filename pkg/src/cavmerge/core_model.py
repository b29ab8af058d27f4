"""Domain types, constraint functions, and vehicle dynamics.

Vehicles are double integrators moving along their own lane axis toward a
single merge point at the end of a control zone of length L.  Safety is
expressed through four scalar functions that must stay nonnegative:

    b1  rear-end gap to the physically preceding vehicle (same lane)
    b2  merge gap to the conflicting vehicle on the other lane, with a
        position-ramped headway so the requirement tightens toward the
        merge point
    b3  headroom to the speed ceiling
    b4  headroom above the speed floor

plus a soft speed-tracking term (squared speed error) relaxed through a slack
variable in the QPs.  Everything in this module is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

# number of equal integration substeps per control interval when the noisy
# dynamics are integrated (disturbances are redrawn per substep)
NOISE_SUBSTEPS = 20


class Lane(str, Enum):
    MAIN = "main"
    MERGE = "merge"


@dataclass
class CavState:
    """State of one vehicle plus its update-scheduling bookkeeping.

    id is the current position in the first-in-first-out queue and shifts
    down whenever a vehicle ahead crosses the merge point; x is measured from
    the vehicle's own lane origin.
    """

    id: int
    lane: Lane
    x: float        # [m] position from own origin
    v: float        # [m/s]
    u: float        # [m/s^2] currently applied control
    t_last: float   # [s] time of last QP solve
    t_next: float = math.inf  # [s] scheduled next solve (self-triggered only)

    def copy(self) -> "CavState":
        return replace(self)


@dataclass(frozen=True)
class VehicleLimits:
    v_min: float  # [m/s]
    v_max: float  # [m/s]
    u_min: float  # [m/s^2], < 0
    u_max: float  # [m/s^2], > 0

    @property
    def u_M(self) -> float:
        """Worst-case control magnitude used in trigger margins."""
        return max(abs(self.u_min), self.u_max)

    def validate(self) -> None:
        if not self.v_max > self.v_min >= 0:
            raise ValueError("speed limits require v_max > v_min >= 0")
        if not self.u_min < 0 < self.u_max:
            raise ValueError("control limits require u_min < 0 < u_max")


@dataclass(frozen=True)
class GainConfig:
    """Barrier slopes, tracking weights, headway geometry, and the
    time-vs-energy weighting of the reference objective.

    beta is the absolute time weight derived from the convex-combination
    weight alpha via beta = alpha * max(u_max^2, u_min^2) / (2 * (1 - alpha));
    both are carried so either can be configured.  relax_weight is the
    quadratic penalty on the tracking slack (a reserved word prevents naming
    it lambda).
    """

    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    k4: float = 1.0
    relax_weight: float = 10.0
    epsilon: float = 1.0
    phi: float = 1.8    # [s] reaction-time headway
    delta: float = 0.0  # [m] standstill gap
    L: float = 400.0    # [m] control zone length
    alpha: float = 0.1
    beta: float = 0.0

    def validate(self) -> None:
        for name in ("k1", "k2", "k3", "k4"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.relax_weight <= 0:
            raise ValueError("relax_weight must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.phi <= 0 or self.L <= 0:
            raise ValueError("phi and L must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


def beta_from_alpha(alpha: float, lim: VehicleLimits) -> float:
    """Absolute time weight matching a convex-combination weight alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    m = max(lim.u_max ** 2, lim.u_min ** 2)
    return alpha * m / (2.0 * (1.0 - alpha))


def alpha_from_beta(beta: float, lim: VehicleLimits) -> float:
    """Inverse of beta_from_alpha."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    m = max(lim.u_max ** 2, lim.u_min ** 2)
    return 2.0 * beta / (m + 2.0 * beta)


@dataclass(frozen=True)
class StateSnapshot:
    """Immutable view of another vehicle as served by the coordinator."""

    x: float
    v: float
    u: float
    t_last: float


@dataclass(frozen=True)
class NeighborView:
    """The up-to-two vehicles whose motion constrains a given vehicle:
    ip = physically preceding vehicle on the same lane, ic = conflicting
    vehicle on the other lane (queue predecessor)."""

    ip: Optional[StateSnapshot] = None
    ic: Optional[StateSnapshot] = None


def b1(xi: CavState, xip: StateSnapshot, g: GainConfig) -> float:
    """Rear-end gap margin [m]: separation minus the speed-proportional
    headway phi*v and standstill gap delta."""
    return xip.x - xi.x - g.phi * xi.v - g.delta


def b2(xi: CavState, xic: StateSnapshot, g: GainConfig) -> float:
    """Merge gap margin [m] against the conflicting vehicle.

    The headway coefficient ramps linearly with progress, phi*x/L, so the
    requirement is vacuous at the zone entry and equals the rear-end headway
    exactly at the merge point.
    """
    return xic.x - xi.x - (g.phi * xi.x / g.L) * xi.v - g.delta


def b3(xi: CavState, lim: VehicleLimits) -> float:
    """Headroom to the speed ceiling [m/s]."""
    return lim.v_max - xi.v


def b4(xi: CavState, lim: VehicleLimits) -> float:
    """Headroom above the speed floor [m/s]."""
    return xi.v - lim.v_min


def clf_terms(xi: CavState, v_ref: float, g: GainConfig) -> Tuple[float, float, bool]:
    """Linear-in-u speed-tracking inequality  lhs_coeff_u*u + lhs_const <= e.

    With V = (v - v_ref)^2 and the double-integrator dynamics the drift term
    vanishes, leaving 2*(v - v_ref)*u + epsilon*(v - v_ref)^2 <= e.  The final
    flag marks that the right-hand side is the relaxation variable.
    """
    dv = xi.v - v_ref
    return 2.0 * dv, g.epsilon * dv * dv, True


def step_dynamics(
    xi: CavState,
    u: float,
    dt: float,
    noise: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None,
    rng=None,
) -> CavState:
    """Advance one vehicle over dt with the control held constant.

    Without noise this is the exact double-integrator update.  With noise the
    interval is split into NOISE_SUBSTEPS equal substeps; over each substep a
    disturbance pair (w1 on dx/dt, w2 on dv/dt) is drawn uniformly from the
    given ranges, held constant, and integrated exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = xi.copy()
    if noise is None:
        out.x = xi.x + xi.v * dt + 0.5 * u * dt * dt
        out.v = xi.v + u * dt
    else:
        if rng is None:
            raise ValueError("noisy integration needs an rng")
        (w1_lo, w1_hi), (w2_lo, w2_hi) = noise
        h = dt / NOISE_SUBSTEPS
        x, v = xi.x, xi.v
        for _ in range(NOISE_SUBSTEPS):
            w1 = rng.uniform(w1_lo, w1_hi)
            w2 = rng.uniform(w2_lo, w2_hi)
            a = u + w2
            x += (v + w1) * h + 0.5 * a * h * h
            v += a * h
        out.x, out.v = x, v
    out.u = u
    return out
