"""Tests for the contact models."""

import numpy as np
import pytest

from bundleopt.contact import (Contact1DParams, Contact1DState, Contact2DParams,
                               Contact2DState, ContactPush1D, ContactPush2D,
                               PenaltyParams, PenaltyStep1DParams, penalty_forces,
                               penalty_step_1d, residuals_1d, smoothed_penalty_forces,
                               step_1d, step_2d_anitescu, step_2d_exact)
from bundleopt.errors import ConfigurationError, DivergedError
from bundleopt.oracle import gauss_hermite_expectation
from bundleopt.smoothing import SmoothingDistribution
from bundleopt.systems import finite_difference_jacobians

from oracles import lcp_oracle_1d

P1 = Contact1DParams(m=1.0, h=0.1, k=100.0)        # c_ratio = 1
P2 = Contact2DParams(m=1.0, h=0.1, k=100.0, mu=0.5,
                     box_half_width=0.25, sphere_radius=0.1)


class TestStep1D:
    def test_no_contact(self):
        nxt, diag = step_1d(Contact1DState(xu=1.0, xa=0.0, command=0.5), P1)
        assert (nxt.xu, nxt.xa) == (1.0, 0.5)
        assert diag.lambda_n == 0.0
        assert diag.mode == "separation"

    def test_contact_blend(self):
        nxt, diag = step_1d(Contact1DState(xu=1.0, xa=0.0, command=1.5), P1)
        assert nxt.xu == pytest.approx(1.25, abs=1e-12)
        assert nxt.xa == pytest.approx(1.25, abs=1e-12)
        assert diag.lambda_n > 0.0

    def test_boundary_continuity(self):
        lo, _ = step_1d(Contact1DState(1.0, 0.3, command=1.0 - 1e-9), P1)
        hi, _ = step_1d(Contact1DState(1.0, 0.3, command=1.0 + 1e-9), P1)
        assert abs(lo.xu - hi.xu) <= 1e-8
        assert abs(lo.xa - hi.xa) <= 1e-8

    def test_defining_equation_residuals(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            state = Contact1DState(xu=rng.uniform(-2, 2), xa=rng.uniform(-2, 2),
                                   command=rng.uniform(-3, 3))
            nxt, diag = step_1d(state, P1)
            res = residuals_1d(state, nxt, diag, P1)
            assert all(v <= 1e-10 for v in res.values()), res

    def test_matches_lcp_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            xu, xa = rng.uniform(-2, 2), rng.uniform(-2, 2)
            cmd = rng.uniform(-3, 3)
            nxt, diag = step_1d(Contact1DState(xu, xa, cmd), P1)
            xu_ref, xa_ref, lam_ref, mode_ref = lcp_oracle_1d(xu, xa, cmd,
                                                              P1.m, P1.h, P1.k)
            assert diag.mode == mode_ref
            assert abs(nxt.xu - xu_ref) <= 1e-12
            assert abs(nxt.xa - xa_ref) <= 1e-12
            assert abs(diag.lambda_n - lam_ref) <= 1e-10

    def test_piecewise_affine_within_mode(self):
        # outputs are affine along command segments that stay in one mode
        for lo_cmd, hi_cmd in ((1.1, 2.9), (-2.5, 0.9)):
            a, _ = step_1d(Contact1DState(1.0, 0.0, lo_cmd), P1)
            b, _ = step_1d(Contact1DState(1.0, 0.0, hi_cmd), P1)
            for t in (0.25, 0.5, 0.75):
                cmd = (1 - t) * lo_cmd + t * hi_cmd
                mid, _ = step_1d(Contact1DState(1.0, 0.0, cmd), P1)
                assert abs(mid.xu - ((1 - t) * a.xu + t * b.xu)) <= 1e-10
                assert abs(mid.xa - ((1 - t) * a.xa + t * b.xa)) <= 1e-10


class TestStep2DExact:
    def test_far_command_leaves_box(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        nxt, diag = step_2d_exact(state, (0.3, 0.9), P2)
        assert diag.mode == "separation"
        assert nxt.xu == 0.0
        # flat in the pressing direction while separated
        nxt2, _ = step_2d_exact(state, (0.3, 0.95), P2)
        assert nxt2.xu == nxt.xu

    def test_sticking_moves_together(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        nxt, diag = step_2d_exact(state, (0.02, 0.5), P2)
        assert diag.mode == "sticking"
        assert nxt.xu == pytest.approx(nxt.xa - 0.0, abs=1e-12)
        # hand-solved sticking system: delta = (cmd - xa) / (1 + c)
        assert nxt.xu == pytest.approx(0.02 / 2.0, abs=1e-12)
        assert abs(diag.lambda_t) <= P2.mu * diag.lambda_n + 1e-12

    def test_sliding_saturates_friction_cone(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        nxt, diag = step_2d_exact(state, (0.3, 0.5), P2)
        assert diag.mode == "sliding_up"
        assert abs(diag.lambda_t) == pytest.approx(P2.mu * diag.lambda_n, abs=1e-12)
        assert nxt.xu > 0.0

    def test_complementarity_residuals_random(self):
        rng = np.random.default_rng(2)
        for _ in range(2000)   :
            state = Contact2DState(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                   rng.uniform(0.3, 1.2))
            cmd = (rng.uniform(-1.5, 1.5), rng.uniform(0.0, 1.2))
            nxt, diag = step_2d_exact(state, cmd, P2)
            assert diag.lambda_n >= -1e-10
            assert diag.gap >= -1e-10
            assert abs(diag.lambda_n * diag.gap) <= 1e-10
            assert abs(diag.lambda_t) <= P2.mu * diag.lambda_n + 1e-9

    def test_mode_boundary_continuity(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        y_c = P2.contact_height
        eps = 1e-9
        # separation <-> contact boundary in the pressing command
        lo, _ = step_2d_exact(state, (0.2, y_c - eps), P2)
        hi, _ = step_2d_exact(state, (0.2, y_c + eps), P2)
        for attr in ("xu", "xa", "ya"):
            assert abs(getattr(lo, attr) - getattr(hi, attr)) <= 1e-8
        # sticking <-> sliding boundary in the tangential command: at the
        # cone boundary |lam_t| = mu*lam_n both systems coincide
        lam_n = P2.h * P2.k * (y_c - 0.5)
        cmd_boundary = (1.0 + P2.c_ratio) * P2.mu * lam_n * P2.h / P2.m
        lo, dlo = step_2d_exact(state, (cmd_boundary - 1e-9, 0.5), P2)
        hi, dhi = step_2d_exact(state, (cmd_boundary + 1e-9, 0.5), P2)
        assert {dlo.mode, dhi.mode} <= {"sticking", "sliding_up"}
        assert dlo.mode != dhi.mode
        for attr in ("xu", "xa", "ya"):
            assert abs(getattr(lo, attr) - getattr(hi, attr)) <= 1e-8

    def test_piecewise_affine_within_mode(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        segs = [((0.0, 0.9), (0.5, 1.1)),       # separation
                ((0.005, 0.5), (0.015, 0.55)),  # sticking
                ((0.4, 0.45), (0.8, 0.55))]     # sliding_up
        for (c0, c1) in segs:
            a, da = step_2d_exact(state, c0, P2)
            b, db = step_2d_exact(state, c1, P2)
            assert da.mode == db.mode
            for t in (0.3, 0.6):
                cmd = tuple((1 - t) * np.array(c0) + t * np.array(c1))
                mid, dm = step_2d_exact(state, cmd, P2)
                assert dm.mode == da.mode
                for attr in ("xu", "xa", "ya"):
                    interp = (1 - t) * getattr(a, attr) + t * getattr(b, attr)
                    assert abs(getattr(mid, attr) - interp) <= 1e-10


class TestStep2DAnitescu:
    def test_deep_separation_identical_to_exact(self):
        state = Contact2DState(0.0, 0.0, 1.0)
        cmd = (0.1, 1.1)
        ex, _ = step_2d_exact(state, cmd, P2)
        re, diag = step_2d_anitescu(state, cmd, P2)
        assert diag.mode == "separation"
        for attr in ("xu", "xa", "ya"):
            assert getattr(re, attr) == pytest.approx(getattr(ex, attr), abs=1e-9)

    def test_sticking_matches_exact(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        for cmd in ((0.02, 0.5), (-0.015, 0.45), (0.0, 0.55)):
            ex, de = step_2d_exact(state, cmd, P2)
            re, dr = step_2d_anitescu(state, cmd, P2)
            assert de.mode == dr.mode == "sticking"
            for attr in ("xu", "xa", "ya"):
                assert getattr(re, attr) == pytest.approx(getattr(ex, attr), abs=1e-6)
            assert dr.lambda_n == pytest.approx(de.lambda_n, abs=1e-6)

    def test_boundary_layer_drags_at_distance(self):
        # small positive gap + tangential command: the exact model leaves
        # the box alone, the relaxed one drags it
        state = Contact2DState(0.0, 0.0, P2.contact_height + 0.02)
        cmd = (0.4, state.ya)
        ex, de = step_2d_exact(state, cmd, P2)
        re, dr = step_2d_anitescu(state, cmd, P2)
        assert de.mode == "separation" and ex.xu == 0.0
        assert abs(re.xu) > 1e-4

    def test_impulses_come_from_duals(self):
        state = Contact2DState(0.0, 0.0, 0.7)
        _, diag = step_2d_anitescu(state, (0.3, 0.5), P2)
        assert diag.lambda_n > 0.0
        assert abs(diag.lambda_t) <= P2.mu * diag.lambda_n + 1e-9


class TestBundledContactSimilarity:
    def test_bundled_surfaces_close_and_informative(self):
        # quadrature-smoothed next box position of the exact vs relaxed
        # models over probes spanning all modes
        state = Contact2DState(0.0, 0.0, 0.7)
        sigma = 0.06
        dist = SmoothingDistribution.isotropic(2, sigma)
        y_c = P2.contact_height
        probes = [(cx, cy) for cx in np.linspace(-0.4, 0.6, 5)
                  for cy in np.linspace(y_c - 0.15, y_c + 0.1, 5)]

        def bundled(stepper, cmd):
            def box_next(c):
                nxt, _ = stepper(state, (float(c[0]), float(c[1])), P2)
                return nxt.xu
            return gauss_hermite_expectation(box_next, np.array(cmd), dist, 41)

        vals_exact = np.array([bundled(step_2d_exact, c) for c in probes])
        vals_relax = np.array([bundled(step_2d_anitescu, c) for c in probes])
        dynamic_range = vals_exact.max() - vals_exact.min()
        assert dynamic_range > 0.01
        assert np.max(np.abs(vals_exact - vals_relax)) <= 0.10 * dynamic_range

        # separated probe: zero exact gradient but negative bundled slope
        # in the pressing direction (dragging happens in expectation)
        probe = (0.45, y_c + 0.05)
        sys_exact = ContactPush2D(P2, model="exact")
        _, b = sys_exact.jacobians(np.array([state.xu, state.xa, state.ya]),
                                   np.array(probe))
        assert b[0, 1] == 0.0
        delta = sigma / 10.0
        for stepper in (step_2d_exact, step_2d_anitescu):
            up = bundled(stepper, (probe[0], probe[1] + delta))
            dn = bundled(stepper, (probe[0], probe[1] - delta))
            assert (up - dn) / (2 * delta) < -1e-3


class TestPenaltyForces:
    PP = PenaltyParams(k_n=100.0, viscous_slope=10.0, psi_s=0.1, mu_d=0.5)

    def test_separation_no_force(self):
        f_n, f_t = penalty_forces(0.1, 0.0, self.PP)
        assert f_n == 0.0 and f_t == 0.0

    def test_penetration_spring(self):
        f_n, f_t = penalty_forces(-0.01, 0.0, self.PP)
        assert f_n == pytest.approx(1.0, abs=1e-12)
        assert f_t == 0.0

    def test_friction_opposes_slip(self):
        f_n, f_t = penalty_forces(-0.01, 0.05, self.PP)
        assert f_t < 0.0
        f_n, f_t2 = penalty_forces(-0.01, -0.05, self.PP)
        assert f_t2 == pytest.approx(-f_t, abs=1e-12)

    def test_stribeck_jump(self):
        eps = 1e-9
        _, f_lo = penalty_forces(-0.01, self.PP.psi_s - eps, self.PP)
        _, f_hi = penalty_forces(-0.01, self.PP.psi_s + eps, self.PP)
        expected_jump = (self.PP.viscous_slope * self.PP.psi_s - self.PP.mu_d) * 1.0
        assert abs(f_lo - f_hi) == pytest.approx(expected_jump, rel=1e-6)

    def test_continuous_configuration_has_no_jump(self):
        pp = PenaltyParams.continuous(k_n=100.0, psi_s=0.1, mu_d=0.5)
        assert pp.friction_jump == pytest.approx(0.0, abs=1e-12)
        eps = 1e-9
        _, f_lo = penalty_forces(-0.01, pp.psi_s - eps, pp)
        _, f_hi = penalty_forces(-0.01, pp.psi_s + eps, pp)
        assert abs(f_lo - f_hi) <= 1e-6


class TestSmoothedPenaltyForces:
    PP = PenaltyParams(k_n=100.0, viscous_slope=10.0, psi_s=0.1, mu_d=0.5)

    def test_force_at_distance(self):
        sigma = 0.05
        dist = SmoothingDistribution(np.diag([sigma**2, 0.02**2]))
        f_n, _ = smoothed_penalty_forces(sigma, 0.0, self.PP, dist, 10000, seed=3)
        assert f_n.value > 0.0

    def test_zero_variance_reduces_to_plain_forces(self):
        dist = SmoothingDistribution(np.zeros((2, 2)))
        f_n, f_t = smoothed_penalty_forces(-0.01, 0.05, self.PP, dist, 100, seed=0)
        ref_n, ref_t = penalty_forces(-0.01, 0.05, self.PP)
        assert f_n.value == pytest.approx(ref_n, rel=1e-14)
        assert f_t.value == pytest.approx(ref_t, rel=1e-14)

    def test_stribeck_jump_removed(self):
        sigma_psi = 0.03
        dist = SmoothingDistribution(np.diag([0.02**2, sigma_psi**2]))
        eps = sigma_psi / 10.0
        n = 10**4
        lo = smoothed_penalty_forces(-0.01, self.PP.psi_s - eps, self.PP, dist, n, seed=5)[1]
        hi = smoothed_penalty_forces(-0.01, self.PP.psi_s + eps, self.PP, dist, n, seed=6)[1]
        bound = 4.0 * np.sqrt((lo.empirical_variance + hi.empirical_variance) / n)
        # also allow the smooth change of the bundled force over 2*eps
        assert abs(lo.value - hi.value) <= bound + 0.1 * abs(lo.value)


class TestPenaltyStep:
    PARAMS = PenaltyStep1DParams(box_mass=1.0, normal_stiffness=1e4,
                                 robot_stiffness=100.0, robot_damping=10.0)

    def test_no_contact_stationary(self):
        state = np.array([1.0, 0.0, 0.0])
        nxt = penalty_step_1d(state, 0.0, self.PARAMS, h=0.001)
        np.testing.assert_allclose(nxt, state, atol=1e-12)

    def test_static_penetration_equilibrium(self):
        # heavy box: the robot settles where spring force = k_n * depth
        params = PenaltyStep1DParams(box_mass=1e6, normal_stiffness=1e4,
                                     robot_stiffness=100.0, robot_damping=10.0)
        h = 0.0005
        state = np.array([0.0, 0.0, -0.1])
        for _ in range(40000):
            state = penalty_step_1d(state, 0.5, params, h)
        depth = state[2] - state[0]
        spring = params.robot_stiffness * (0.5 - state[2])
        assert depth > 0.0
        assert depth == pytest.approx(spring / params.normal_stiffness, rel=1e-3)

    def test_momentum_balance_over_episode(self):
        h = 0.0005                       # h*sqrt(k_n/m) = 0.05
        state = np.array([0.2, 0.0, 0.0])
        impulse = 0.0
        for _ in range(4000):
            gap = state[0] - state[2]
            f_n = -self.PARAMS.normal_stiffness * min(gap, 0.0)
            impulse += h * f_n
            state = penalty_step_1d(state, 1.0, self.PARAMS, h)
        momentum_gain = self.PARAMS.box_mass * state[1]
        assert momentum_gain > 0.0
        assert momentum_gain == pytest.approx(impulse, rel=0.02)

    def test_divergence_detected(self):
        params = PenaltyStep1DParams(box_mass=0.001, normal_stiffness=1e6,
                                     robot_stiffness=100.0, robot_damping=10.0)
        state = np.array([0.0, 0.0, 0.5])   # deep penetration, stiff spring
        with pytest.raises(DivergedError):
            for _ in range(2000):
                state = penalty_step_1d(state, 0.5, params, h=0.05)


class TestAdapters:
    def test_push_1d_jacobians_match_fd_within_modes(self):
        sys = ContactPush1D(P1)
        for x, u in (([1.0, 0.0], [0.2]), ([1.0, 0.0], [1.7])):
            a, b = sys.jacobians(np.array(x), np.array(u))
            a_fd, b_fd = finite_difference_jacobians(sys.step, np.array(x), np.array(u))
            np.testing.assert_allclose(a, a_fd, atol=1e-6)
            np.testing.assert_allclose(b, b_fd, atol=1e-6)

    def test_push_1d_batch_matches_scalar(self):
        sys = ContactPush1D(P1)
        rng = np.random.default_rng(4)
        xs = rng.uniform(-1, 2, (50, 2))
        us = rng.uniform(-1, 3, (50, 1))
        batch = sys.step_batch(xs, us)
        for i in range(50):
            np.testing.assert_array_equal(batch[i], sys.step(xs[i], us[i]))

    def test_push_2d_exact_jacobians_match_fd_within_modes(self):
        sys = ContactPush2D(P2, model="exact")
        probes = [([0.0, 0.0, 0.7], [0.3, 0.9]),    # separation
                  ([0.0, 0.0, 0.7], [0.02, 0.5]),   # sticking
                  ([0.0, 0.0, 0.7], [0.4, 0.5])]    # sliding
        for x, u in probes:
            a, b = sys.jacobians(np.array(x), np.array(u))
            a_fd, b_fd = finite_difference_jacobians(sys.step, np.array(x), np.array(u))
            np.testing.assert_allclose(a, a_fd, atol=1e-6)
            np.testing.assert_allclose(b, b_fd, atol=1e-6)

    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigurationError):
            ContactPush2D(P2, model="smooth")
