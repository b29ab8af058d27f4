"""Unconstrained optimal reference trajectory for a single vehicle.

Minimizing  beta * t_exit + 1/2 * integral(u^2)  over the control zone,
with free terminal speed and free terminal time, yields a control that is
linear in time: u*(t) = a*t + b.  Transversality pins u*(tf) = 0, the
terminal position pins x*(tf) = L, and the free-time condition pins
beta + a * v*(tf) = 0.  We solve that 3-unknown system with a damped
Newton iteration and hand the (a, b, tf) triple to the controllers, which
track it through the QP objective.

The reference deliberately ignores the safety and actuation constraints;
clamping in ref_control / ref_speed is presentation-level only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import VehicleLimits

# Newton iteration budget and residual tolerance (max-norm).
MAX_ITERS = 100
RESIDUAL_TOL = 1e-10


class NoConvergence(RuntimeError):
    """Root finder exhausted its budget; caller should fall back to coasting."""


@dataclass(frozen=True)
class ReferenceSolution:
    """Linear-control reference u*(t) = a*t + b over [0, tf], t from entry."""

    a: float  # m/s^3, slope of the reference control
    b: float  # m/s^2, reference control at entry
    tf: float  # s, planned exit time measured from entry
    v0: float  # m/s, speed at entry

    def control(self, t: float) -> float:
        """Unclamped u*(t); zero after the planned exit."""
        if t > self.tf:
            return 0.0
        return self.a * t + self.b

    def speed(self, t: float) -> float:
        """Unclamped v*(t); frozen at v*(tf) after the planned exit."""
        t = min(t, self.tf)
        return 0.5 * self.a * t * t + self.b * t + self.v0

    def position(self, t: float) -> float:
        """x*(t) with x*(0) = 0; extrapolates at v*(tf) past the exit."""
        if t <= self.tf:
            return (self.a / 6.0) * t**3 + 0.5 * self.b * t * t + self.v0 * t
        return self.position(self.tf) + (t - self.tf) * self.speed(self.tf)


def coasting_reference(v0: float, L: float) -> ReferenceSolution:
    """Zero-control reference: hold v0, exit at L/v0 seconds."""
    return ReferenceSolution(a=0.0, b=0.0, tf=L / v0, v0=v0)


def _residuals(a: float, b: float, tf: float, v0: float, L: float,
               beta: float) -> np.ndarray:
    vf = 0.5 * a * tf * tf + b * tf + v0
    return np.array([
        a * tf + b,                                   # u*(tf) = 0
        (a / 6.0) * tf**3 + 0.5 * b * tf * tf + v0 * tf - L,  # x*(tf) = L
        beta + a * vf,                                # free-time condition
    ])


def _jacobian(a: float, b: float, tf: float, v0: float) -> np.ndarray:
    vf = 0.5 * a * tf * tf + b * tf + v0
    uf = a * tf + b
    return np.array([
        [tf, 1.0, a],
        [tf**3 / 6.0, 0.5 * tf * tf, vf],
        [vf + 0.5 * a * tf * tf, a * tf, a * uf],
    ])


def solve_reference(v0: float, L: float, beta: float) -> ReferenceSolution:
    """Solve the first-order system for the linear reference control.

    Raises NoConvergence if the damped Newton iteration fails; the caller
    is expected to fall back to coasting_reference(v0, L).
    """
    if not (v0 > 0.0 and L > 0.0 and beta >= 0.0):
        raise ValueError(f"need v0>0, L>0, beta>=0; got {v0=}, {L=}, {beta=}")
    if beta == 0.0:
        # zero time-weight: pure energy cost, exact coast, no iteration
        return coasting_reference(v0, L)

    a, b, tf = 0.0, 0.0, L / v0  # coast initialization; Jacobian det = v0^2
    # measure the position residual relative to L so one badly scaled row
    # (meters vs m/s^2) cannot dominate the line-search merit
    scale = np.array([1.0, 1.0 / L, 1.0])
    res = _residuals(a, b, tf, v0, L, beta)
    merit = float(np.sum((scale * res) ** 2))
    for _ in range(MAX_ITERS):
        if float(np.max(np.abs(res))) < RESIDUAL_TOL:
            return ReferenceSolution(a=a, b=b, tf=tf, v0=v0)
        try:
            step = np.linalg.solve(_jacobian(a, b, tf, v0), -res)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Jacobian") from exc
        # first trial keeps tf from being cut by more than half, then
        # backtrack on an Armijo-style sufficient-decrease test
        damp = 1.0 if step[2] >= 0.0 else min(1.0, 0.5 * tf / -step[2])
        for _ in range(60):
            a_n, b_n, tf_n = a + damp * step[0], b + damp * step[1], tf + damp * step[2]
            if tf_n > 1e-9:
                res_n = _residuals(a_n, b_n, tf_n, v0, L, beta)
                merit_n = float(np.sum((scale * res_n) ** 2))
                if np.isfinite(merit_n) and merit_n < merit * (1.0 - 1e-4 * damp):
                    a, b, tf, res, merit = a_n, b_n, tf_n, res_n, merit_n
                    break
            damp *= 0.5
        else:
            raise NoConvergence("line search stalled")
    if float(np.max(np.abs(res))) < RESIDUAL_TOL:
        return ReferenceSolution(a=a, b=b, tf=tf, v0=v0)
    raise NoConvergence(f"residual budget exhausted after {MAX_ITERS} iterations")


def ref_control(sol: ReferenceSolution, t_since_entry: float,
                limits: VehicleLimits) -> float:
    """Reference acceleration at t (s since entry), clamped to actuation."""
    u = sol.control(t_since_entry)
    return min(max(u, limits.u_min), limits.u_max)


def ref_speed(sol: ReferenceSolution, t_since_entry: float,
              limits: VehicleLimits) -> float:
    """Reference speed at t (s since entry), clamped to the speed band."""
    v = sol.speed(t_since_entry)
    return min(max(v, limits.v_min), limits.v_max)
