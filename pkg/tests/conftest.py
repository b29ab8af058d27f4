"""Shared builders for the test suite."""

import math

import numpy as np
import pytest

from cavmerge.core_model import (
    CavState,
    GainConfig,
    Lane,
    StateSnapshot,
    VehicleLimits,
)

# Benchmark parameter set used across the suite: 400 m zone, 1.8 s headway,
# asymmetric accel/brake limits, 0..30 m/s speed envelope, unit barrier slopes.
LIMITS = VehicleLimits(v_min=0.0, v_max=30.0, u_min=-5.886, u_max=4.905)
GAINS = GainConfig()


@pytest.fixture
def limits() -> VehicleLimits:
    return LIMITS


@pytest.fixture
def gains() -> GainConfig:
    return GAINS


def make_state(x=50.0, v=20.0, u=0.0, lane=Lane.MAIN, cav_id=1, t_last=0.0) -> CavState:
    return CavState(id=cav_id, lane=lane, x=x, v=v, u=u, t_last=t_last)


def make_snapshot(x=100.0, v=18.0, u=0.0, t_last=0.0) -> StateSnapshot:
    return StateSnapshot(x=x, v=v, u=u, t_last=t_last)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
