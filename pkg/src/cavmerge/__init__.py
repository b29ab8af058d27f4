"""cavmerge: decentralized merging control for connected automated vehicles.

A library and simulator for vehicles approaching a single merge point under
barrier-constrained tracking QPs, re-solved under one of three disciplines:
a fixed period (time-driven), state-box boundary crossings (event-triggered),
or predicted constraint-violation times (self-triggered).
"""

from .core_model import (
    CavState,
    GainConfig,
    Lane,
    NeighborView,
    StateSnapshot,
    VehicleLimits,
    alpha_from_beta,
    b1,
    b2,
    b3,
    b4,
    beta_from_alpha,
    clf_terms,
    step_dynamics,
)

__all__ = [
    "CavState",
    "GainConfig",
    "Lane",
    "NeighborView",
    "StateSnapshot",
    "VehicleLimits",
    "alpha_from_beta",
    "b1",
    "b2",
    "b3",
    "b4",
    "beta_from_alpha",
    "clf_terms",
    "step_dynamics",
]

__version__ = "0.1.0"
