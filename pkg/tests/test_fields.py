import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fgd.errors import OffBundleError, OffNeighborhoodError, ShapeError
from fgd.fields import (FieldParams, drift_d, euclidean_momentum_field, feedback_phi_rate,
                        feedback_term, feedback_theta_rate, field_extended_x, field_feedback_full,
                        field_tangent_bundle)
from fgd.geometry import LyapunovParams, State, lyapunov_grad_v, lyapunov_v, riemannian_grad
from fgd.linalg import frobenius_inner, frobenius_norm, make_rng, random_orthonormal
from fgd.sampling import on_bundle_state, random_state_in_s

seeds = st.integers(0, 2**31 - 1)
P = FieldParams(eta=0.1, gamma=0.1, alpha=12.0)


def pair_norm(a, b):
    return math.hypot(frobenius_norm(a), frobenius_norm(b))


def x_oracle(theta, phi, g, eta, gamma):
    """The extended field written directly with numpy's inverse."""
    gi = np.linalg.inv(theta.T @ theta)
    sym = lambda a: 0.5 * (a + a.T)
    d = -gamma * phi - g
    xt = phi - theta @ gi @ sym(theta.T @ phi)
    xp = (theta @ gi @ (gi @ theta.T @ phi @ sym(theta.T @ phi) - phi.T @ phi)
          + (d - theta @ gi @ sym(theta.T @ d)) / eta)
    return xt, xp


class TestParams:
    @pytest.mark.parametrize("kw", [{"eta": 0.0}, {"eta": 1.0, "gamma": -0.1},
                                    {"eta": 1.0, "alpha": -1.0}, {"eta": 1.0, "inverse_mode": "x"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            FieldParams(**kw)


class TestDrift:
    def test_zero(self):
        s = on_bundle_state(5, 3, 0)
        assert not drift_d(s, np.zeros((5, 3)), FieldParams(eta=1.0, gamma=0.0)).any()

    def test_substitution(self):
        x = random_orthonormal(5, 3, 0)
        out = drift_d(State(x, x), np.zeros((5, 3)), FieldParams(eta=1.0, gamma=0.1))
        np.testing.assert_array_equal(out, -0.1 * x)

    def test_random(self):
        rng = make_rng(1)
        s = random_state_in_s(rng, 5, 3)
        g = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(drift_d(s, g, P), -P.gamma * s.phi - g)

    def test_shape(self):
        with pytest.raises(ShapeError):
            drift_d(on_bundle_state(5, 3, 0), np.zeros((5, 2)), P)

    def test_euclidean_field(self):
        s = random_state_in_s(make_rng(2), 4, 2)
        g = np.ones((4, 2))
        dt, dp = euclidean_momentum_field(s, g, P)
        np.testing.assert_array_equal(dt, s.phi)
        np.testing.assert_allclose(dp, (-P.gamma * s.phi - g) / P.eta)


class TestTangentBundleField:
    def test_equilibrium(self):
        x = random_orthonormal(5, 3, 0)
        dt, dp = field_tangent_bundle(State(x, np.zeros((5, 3))), np.zeros((5, 3)), P)
        assert not dt.any() and frobenius_norm(dp) == 0

    def test_projected_gradient(self):
        x = random_orthonormal(5, 3, 0)
        g = make_rng(0, 4).standard_normal((5, 3))
        dt, dp = field_tangent_bundle(State(x, np.zeros((5, 3))), g, FieldParams(eta=0.1, gamma=0.3))
        assert not dt.any()
        np.testing.assert_allclose(dp, -riemannian_grad(x, g) / 0.1, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_constraint_derivatives_vanish(self, seed):
        s = on_bundle_state(6, 3, seed % 1000, phi_scale=2.0)
        g = make_rng(seed, 1).standard_normal((6, 3))
        dt, dp = field_tangent_bundle(s, g, P)
        th, ph = s.theta, s.phi
        d_gram = th.T @ dt + dt.T @ th
        d_tan = 0.5 * (dt.T @ ph + th.T @ dp + dp.T @ th + ph.T @ dt)
        assert frobenius_norm(d_gram) <= 1e-10 * max(1.0, pair_norm(dt, dp))
        assert frobenius_norm(d_tan) <= 1e-10 * max(1.0, pair_norm(dt, dp))

    def test_rejects_off_bundle(self):
        s = random_state_in_s(make_rng(3), 5, 3, d_max=0.9)
        with pytest.raises(OffBundleError):
            field_tangent_bundle(State(1.1 * s.theta, s.phi), np.zeros((5, 3)), P)


class TestExtendedField:
    def test_matches_oracle(self):
        rng = make_rng(4)
        for _ in range(20):
            s = random_state_in_s(rng, 6, 3)
            g = rng.standard_normal((6, 3))
            ot, op = x_oracle(s.theta, s.phi, g, P.eta, P.gamma)
            xt, xp = field_extended_x(s, g, P)
            assert pair_norm(xt - ot, xp - op) <= 1e-10 * pair_norm(ot, op)

    def test_agrees_with_tangent_bundle_field(self):
        for seed in range(10):
            s = on_bundle_state(7, 4, seed)
            g = make_rng(seed, 2).standard_normal((7, 4))
            xt, xp = field_extended_x(s, g, P)
            tt, tp = field_tangent_bundle(s, g, P)
            assert pair_norm(xt - tt, xp - tp) <= 1e-10 * max(1.0, pair_norm(tt, tp))

    def test_rest_point(self):
        x = random_orthonormal(5, 3, 0)
        xt, xp = field_extended_x(State(x, np.zeros((5, 3))), np.zeros((5, 3)), P)
        assert not xt.any() and frobenius_norm(xp) == 0

    @settings(max_examples=300, deadline=None)
    @given(seeds, st.floats(0.01, 1.0), st.floats(0.0, 1.0))
    def test_conserves_v(self, seed, eta, gamma):
        rng = make_rng(seed)
        s = random_state_in_s(rng, int(rng.integers(2, 8)), 1 + int(rng.integers(0, 2)))
        g = rng.standard_normal(s.theta.shape)
        k = LyapunovParams(*rng.uniform(0.1, 10, 2))
        gt, gp = lyapunov_grad_v(s, k)
        xt, xp = field_extended_x(s, g, FieldParams(eta=eta, gamma=gamma))
        inner = frobenius_inner(gt, xt) + frobenius_inner(gp, xp)
        assert abs(inner) <= 1e-10 * max(1.0, pair_norm(gt, gp) * pair_norm(xt, xp))

    def test_off_neighbourhood(self):
        x = 2 * random_orthonormal(5, 3, 0)
        with pytest.raises(OffNeighborhoodError):
            field_extended_x(State(x, x), np.zeros((5, 3)), P)


class TestFeedbackTerm:
    def test_vanishes_on_bundle(self):
        ft, fp = feedback_term(on_bundle_state(6, 2, 1), P)
        assert frobenius_norm(ft) <= 1e-14 and frobenius_norm(fp) <= 1e-14

    def test_scaled_point(self):
        q = random_orthonormal(5, 3, 0)
        ft, fp = feedback_term(State(1.1 * q, np.zeros((5, 3))), FieldParams(eta=0.1, alpha=4.0))
        np.testing.assert_allclose(ft, 1.1 * (1 - 1 / 1.21) * q, atol=1e-14)
        np.testing.assert_allclose(ft, 0.190909090909 * q, atol=1e-12)
        assert not fp.any()


class TestFullField:
    def test_equals_tangent_field_on_bundle(self):
        for seed in range(10):
            s = on_bundle_state(6, 3, seed)
            g = make_rng(seed, 3).standard_normal((6, 3))
            a = field_feedback_full(s, g, P)
            b = field_tangent_bundle(s, g, P)
            assert pair_norm(a[0] - b[0], a[1] - b[1]) <= 1e-10 * max(1.0, pair_norm(*b))

    def test_directional_derivative_of_v(self):
        rng = make_rng(5)
        for _ in range(30):
            s = random_state_in_s(rng, 5, 3, d_max=0.5)
            g = rng.standard_normal((5, 3))
            p = FieldParams(eta=0.2, gamma=0.1, alpha=rng.uniform(1, 10), inverse_mode="exact")
            ft, fp = field_feedback_full(s, g, p)
            eps = 1e-6
            plus = lyapunov_v(State(s.theta + eps * ft, s.phi + eps * fp))
            minus = lyapunov_v(State(s.theta - eps * ft, s.phi - eps * fp))
            rate = (plus - minus) / (2 * eps)
            v = lyapunov_v(s)
            assert rate == pytest.approx(-p.alpha * v, rel=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(seeds, st.floats(0.1, 30))
    def test_v_rate_identity(self, seed, alpha):
        rng = make_rng(seed)
        s = random_state_in_s(rng, 6, 3)
        g = rng.standard_normal((6, 3))
        p = FieldParams(eta=0.1, gamma=0.1, alpha=alpha)
        gt, gp = lyapunov_grad_v(s)
        ft, fp = field_feedback_full(s, g, p)
        xt, xp = field_extended_x(s, g, p)
        rate = frobenius_inner(gt, ft) + frobenius_inner(gp, fp)
        v = lyapunov_v(s)
        # Absolute floor from the X part, which is cancellation-limited.
        assert abs(rate + alpha * v) <= 1e-8 * alpha * v + 1e-10 * max(1.0, pair_norm(gt, gp) * pair_norm(xt, xp))

    def test_neumann_close_to_exact_near_manifold(self):
        rng = make_rng(6)
        for _ in range(30):
            q = random_orthonormal(8, 3, int(rng.integers(0, 10**6)))
            a = rng.standard_normal((8, 3))
            s = State(q + 0.004 * a / frobenius_norm(a), rng.standard_normal((8, 3)))
            g = rng.standard_normal((8, 3))
            e = field_feedback_full(s, g, FieldParams(eta=0.1, gamma=0.1, alpha=12.0, inverse_mode="exact"))
            n = field_feedback_full(s, g, FieldParams(eta=0.1, gamma=0.1, alpha=12.0, inverse_mode="neumann"))
            assert pair_norm(e[0] - n[0], e[1] - n[1]) <= 1e-3 * pair_norm(*e)


class TestFusedRates:
    @settings(max_examples=200, deadline=None)
    @given(seeds, st.sampled_from(["exact", "neumann"]))
    def test_match_composed_field(self, seed, mode):
        rng = make_rng(seed)
        n = int(rng.integers(1, 9))
        s = random_state_in_s(rng, n + int(rng.integers(0, 4)), n, d_max=0.9)
        g = rng.standard_normal(s.theta.shape)
        p = FieldParams(eta=rng.uniform(0.01, 1), gamma=rng.uniform(0, 1), alpha=rng.uniform(0, 20),
                        inverse_mode=mode)
        ct, cp = field_feedback_full(s, g, p)
        rt = feedback_theta_rate(s.theta, s.phi, p)
        rp = feedback_phi_rate(s.theta, s.phi, g, p)
        assert pair_norm(rt - ct, rp - cp) <= 1e-10 * max(1.0, pair_norm(ct, cp))

    def test_shape_error(self):
        s = on_bundle_state(5, 3, 0)
        with pytest.raises(ShapeError):
            feedback_phi_rate(s.theta, s.phi, np.zeros((5, 2)), P)
