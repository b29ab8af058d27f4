"""Independent reference implementations used only to cross-check the package.

Everything here is deliberately written in a different style from the library
code (dense grids, generic numeric search) so that agreement is evidence, not
tautology.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from cavmerge.qp_solver import QpProblem


# ---------------------------------------------------------------------------
# tracking-QP oracle: 1-D grid over u with closed-form inner minimization in e
# ---------------------------------------------------------------------------

def qp_grid_solve(
    p: QpProblem,
    u_lo: float,
    u_hi: float,
    resolution: float = 1e-3,
) -> Tuple[bool, float, float, float]:
    """Return (feasible, u, e, objective) from a dense u-grid.

    For each grid value of u the rows reduce to one-sided bounds on e; the
    inner minimizer of relax_weight*e^2 is the projection of 0 onto the
    remaining interval.  Exact in e, resolution-limited in u.
    """
    n = int(round((u_hi - u_lo) / resolution)) + 1
    u = np.linspace(u_lo, u_hi, n)
    lo = np.full_like(u, -np.inf)
    hi = np.full_like(u, np.inf)
    ok = np.ones_like(u, dtype=bool)
    tol = 1e-9
    for cu, ce, c0 in p.rows:
        r = cu * u + c0
        if ce > 0:
            lo = np.maximum(lo, -r / ce)
        elif ce < 0:
            hi = np.minimum(hi, -r / ce)
        else:
            ok &= r >= -tol
    ok &= lo <= hi + tol
    if not ok.any():
        return False, math.nan, math.nan, math.inf
    e = np.clip(0.0, lo, hi)
    obj = 0.5 * (u - p.u_ref) ** 2 + p.relax_weight * e ** 2
    obj = np.where(ok, obj, np.inf)
    j = int(np.argmin(obj))
    return True, float(u[j]), float(e[j]), float(obj[j])


def qp_grid_feasible_2d(
    p: QpProblem,
    u_lo: float,
    u_hi: float,
    e_lo: float = -100.0,
    e_hi: float = 100.0,
    n_u: int = 400,
    n_e: int = 400,
) -> bool:
    """Dense 2-D feasibility probe over (u, e)."""
    u = np.linspace(u_lo, u_hi, n_u)
    e = np.linspace(e_lo, e_hi, n_e)
    uu, ee = np.meshgrid(u, e, indexing="ij")
    feas = np.ones_like(uu, dtype=bool)
    # strict check: a positive verdict must be trustworthy (the caller treats
    # "grid feasible + solver infeasible" as a solver bug); thin slivers the
    # grid misses are resolved by verifying the solver's own point instead
    for cu, ce, c0 in p.rows:
        feas &= cu * uu + ce * ee + c0 >= -1e-9
    return bool(feas.any())


# ---------------------------------------------------------------------------
# bound-set row oracle: dense grids over the clamped state boxes
# ---------------------------------------------------------------------------

def box_grid_min(fn, intervals: Sequence[Tuple[float, float]], n: int = 101) -> float:
    """Minimum of fn over the product of intervals on an n-per-axis grid."""
    axes = [np.linspace(lo, hi, n) for lo, hi in intervals]
    grids = np.meshgrid(*axes, indexing="ij")
    return float(np.min(fn(*grids)))


# ---------------------------------------------------------------------------
# reference-trajectory oracle: direct transcription over piecewise-constant u
# ---------------------------------------------------------------------------

def reference_cost_oracle(v0: float, L: float, beta: float, steps: int = 2000) -> float:
    """Best cost beta*tf + 0.5*integral(u^2) found by direct search.

    For a fixed exit time tf the control is discretized into `steps`
    piecewise-constant pieces; minimizing 0.5*h*sum(u_k^2) subject to the
    terminal position equality (the speed end is free) is a least-norm
    problem with the closed-form solution u = mu * c / h, where
    c_k = h*(tf - t_mid_k) is the unit-control position influence and
    mu = h*(L - v0*tf) / ||c||^2.  The outer scalar minimization over tf is
    done numerically.
    """
    from scipy.optimize import minimize_scalar

    def cost_of_tf(tf: float) -> float:
        if tf <= 0:
            return math.inf
        h = tf / steps
        t_mid = (np.arange(steps) + 0.5) * h
        c = h * (tf - t_mid)
        mu = h * (L - v0 * tf) / float(c @ c)
        u = (mu / h) * c
        return beta * tf + 0.5 * h * float(u @ u)

    coast_tf = L / v0
    res = minimize_scalar(
        cost_of_tf,
        bounds=(max(coast_tf * 0.2, 1e-3), coast_tf * 1.001),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(min(res.fun, cost_of_tf(coast_tf)))
