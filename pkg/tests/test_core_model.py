"""Constraint functions, tracking terms, and dynamics integration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmerge.core_model import (
    CavState,
    GainConfig,
    Lane,
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

from conftest import GAINS, LIMITS, make_snapshot, make_state

finite = st.floats(min_value=-500.0, max_value=500.0, allow_nan=False)
speeds = st.floats(min_value=0.0, max_value=35.0, allow_nan=False)
positions = st.floats(min_value=0.0, max_value=400.0, allow_nan=False)


class TestGapFunctions:
    def test_rear_end_gap_value(self):
        # 100 - 50 - 1.8*20 - 0 = 14
        xi = make_state(x=50.0, v=20.0)
        xip = make_snapshot(x=100.0)
        assert b1(xi, xip, GAINS) == pytest.approx(14.0, abs=1e-12)

    def test_rear_end_gap_boundary(self):
        # separation exactly equal to the required headway
        xi = make_state(x=50.0, v=20.0)
        xip = make_snapshot(x=50.0 + GAINS.phi * 20.0 + GAINS.delta)
        assert b1(xi, xip, GAINS) == pytest.approx(0.0, abs=1e-12)

    def test_merge_gap_value(self):
        # 120 - 200 - 1.8*(200/400)*20 = -98
        xi = make_state(x=200.0, v=20.0)
        xic = make_snapshot(x=120.0)
        assert b2(xi, xic, GAINS) == pytest.approx(-98.0, abs=1e-12)

    def test_merge_gap_at_entry_ignores_speed(self):
        xic = make_snapshot(x=77.0)
        vals = {b2(make_state(x=0.0, v=v), xic, GAINS) for v in (0.0, 10.0, 30.0)}
        assert vals == {77.0 - GAINS.delta}

    def test_merge_gap_at_exit_matches_rear_end_form(self):
        xi = make_state(x=GAINS.L, v=23.0)
        other = make_snapshot(x=500.0, v=19.0)
        assert b2(xi, other, GAINS) == pytest.approx(b1(xi, other, GAINS), abs=1e-12)

    def test_speed_headroom_values(self):
        assert b3(make_state(v=30.0), LIMITS) == 0.0
        assert b3(make_state(v=22.0), LIMITS) == pytest.approx(8.0)
        assert b4(make_state(v=0.0), LIMITS) == 0.0
        assert b4(make_state(v=7.5), LIMITS) == pytest.approx(7.5)

    @given(x1=positions, v1=speeds, x2=positions, v2=speeds, xp1=finite, xp2=finite, a=finite, c=finite)
    @settings(max_examples=100, deadline=None)
    def test_affine_superposition(self, x1, v1, x2, v2, xp1, xp2, a, c):
        # b1, b3, b4 are affine in the state entries: f(a*s1 + s2) + (a-1+1)... check
        # f(a*s1 + (1-a)*s2) == a*f(s1) + (1-a)*f(s2) for the convex combination,
        # which holds exactly for affine maps.
        g, lim = GAINS, LIMITS
        w = a / 500.0  # keep the combination weight modest
        sa = make_state(x=w * x1 + (1 - w) * x2, v=w * v1 + (1 - w) * v2)
        s1, s2 = make_state(x=x1, v=v1), make_state(x=x2, v=v2)
        pa = make_snapshot(x=w * xp1 + (1 - w) * xp2)
        p1, p2 = make_snapshot(x=xp1), make_snapshot(x=xp2)
        assert b1(sa, pa, g) == pytest.approx(w * b1(s1, p1, g) + (1 - w) * b1(s2, p2, g), abs=1e-9)
        assert b3(sa, lim) == pytest.approx(w * b3(s1, lim) + (1 - w) * b3(s2, lim), abs=1e-9)
        assert b4(sa, lim) == pytest.approx(w * b4(s1, lim) + (1 - w) * b4(s2, lim), abs=1e-9)


class TestTrackingTerms:
    def test_zero_error_leaves_only_slack(self):
        cu, const, rhs_is_e = clf_terms(make_state(v=20.0), 20.0, GAINS)
        assert (cu, const, rhs_is_e) == (0.0, 0.0, True)

    def test_below_reference(self):
        # v=20, v_ref=22: -4u + 4 <= e
        cu, const, _ = clf_terms(make_state(v=20.0), 22.0, GAINS)
        assert cu == pytest.approx(-4.0)
        assert const == pytest.approx(4.0)

    def test_above_reference(self):
        # v=25, v_ref=20: 10u + 25 <= e
        cu, const, _ = clf_terms(make_state(v=25.0), 20.0, GAINS)
        assert cu == pytest.approx(10.0)
        assert const == pytest.approx(25.0)


class TestDynamics:
    def test_constant_speed(self):
        out = step_dynamics(make_state(x=0.0, v=20.0), 0.0, 1.0)
        assert (out.x, out.v) == (20.0, 20.0)

    def test_closed_form_kinematics(self):
        out = step_dynamics(make_state(x=0.0, v=20.0), 2.0, 1.0)
        assert out.x == pytest.approx(21.0, abs=1e-12)
        assert out.v == pytest.approx(22.0, abs=1e-12)
        assert out.u == 2.0

    @given(
        x=positions,
        v=speeds,
        u=st.floats(min_value=-6.0, max_value=5.0, allow_nan=False),
        dt=st.floats(min_value=1e-3, max_value=2.0, allow_nan=False),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_substep_composition(self, x, v, u, dt):
        # composing 10^4 exact kinematic substeps must reproduce the single-shot
        # closed form up to float accumulation
        out = step_dynamics(make_state(x=x, v=v), u, dt)
        n = 10_000
        h = dt / n
        xs, vs = x, v
        for _ in range(n):
            xs += vs * h + 0.5 * u * h * h
            vs += u * h
        assert out.x == pytest.approx(xs, abs=1e-9)
        assert out.v == pytest.approx(vs, abs=1e-9)

    def test_noise_bounds_and_determinism(self):
        noise = ((-2.0, 2.0), (-0.2, 0.2))
        a = step_dynamics(make_state(), 1.0, 0.05, noise=noise, rng=np.random.default_rng(7))
        b = step_dynamics(make_state(), 1.0, 0.05, noise=noise, rng=np.random.default_rng(7))
        assert (a.x, a.v) == (b.x, b.v)
        # displacement must stay inside the worst-case noise envelope
        clean = step_dynamics(make_state(), 1.0, 0.05)
        assert abs(a.x - clean.x) <= 2.0 * 0.05 + 0.2 * 0.05 ** 2
        assert abs(a.v - clean.v) <= 0.2 * 0.05 + 1e-12

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            step_dynamics(make_state(), 0.0, 0.0)

    def test_noisy_needs_rng(self):
        with pytest.raises(ValueError):
            step_dynamics(make_state(), 0.0, 0.1, noise=((-1, 1), (-0.1, 0.1)))


class TestWeights:
    def test_alpha_beta_round_trip(self):
        for alpha in (0.0, 0.1, 0.25, 0.4, 0.5, 0.9):
            beta = beta_from_alpha(alpha, LIMITS)
            assert alpha_from_beta(beta, LIMITS) == pytest.approx(alpha, abs=1e-12)

    def test_beta_value_at_half(self):
        # alpha=0.5 with |u_min|=5.886 dominating: 0.5*5.886^2/(2*0.5) = 34.645/2 = 17.3226...
        assert beta_from_alpha(0.5, LIMITS) == pytest.approx(17.322498, abs=1e-5)

    def test_validation(self):
        with pytest.raises(ValueError):
            VehicleLimits(v_min=5.0, v_max=4.0, u_min=-1.0, u_max=1.0).validate()
        with pytest.raises(ValueError):
            GainConfig(alpha=1.0).validate()
        GainConfig(beta=5.0, alpha=0.2).validate()
