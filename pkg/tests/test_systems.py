"""Tests for the benchmark dynamical systems."""

import numpy as np
import pytest

from bundleopt.systems import (DubinsCar, LinearSystem, Pendulum, Quadrotor,
                               dubins_step, finite_difference_jacobians,
                               linearize_exact, pendulum_step, quadrotor_step)


class TestPendulum:
    def test_rest_is_fixed_point(self):
        x = pendulum_step(np.zeros(2), np.zeros(1))
        np.testing.assert_array_equal(x, np.zeros(2))

    def test_upright_is_fixed_point(self):
        x = pendulum_step(np.array([np.pi, 0.0]), np.zeros(1))
        np.testing.assert_allclose(x, [np.pi, 0.0], atol=1e-15)

    def test_hand_computed_step(self):
        x = pendulum_step(np.array([np.pi / 2, 0.0]), np.zeros(1),
                          mass=1.0, length=1.0, gravity=9.81, damping=0.0, h=0.01)
        assert x[1] == pytest.approx(-0.0981, abs=1e-12)
        assert x[0] == pytest.approx(np.pi / 2 - 0.000981, abs=1e-12)

    def test_energy_drift_small(self):
        # symplectic integrator: bounded energy error on the undamped system
        sys = Pendulum(damping=0.0, h=1e-4)
        x = np.array([2.0, 0.0])
        e0 = sys.energy(x)
        for _ in range(10**4):
            x = sys.step(x, np.zeros(1))
        assert abs(sys.energy(x) - e0) / e0 <= 0.01

    def test_batch_matches_scalar(self):
        sys = Pendulum(damping=0.2, h=0.05)
        xs = np.array([[0.3, -1.0], [2.0, 0.5]])
        us = np.array([[0.7], [-0.2]])
        batch = sys.step_batch(xs, us)
        for i in range(2):
            np.testing.assert_allclose(batch[i], sys.step(xs[i], us[i]), rtol=1e-15)


class TestDubins:
    def test_zero_input_fixed_point(self):
        x = np.array([0.4, -0.2, 1.1])
        np.testing.assert_array_equal(dubins_step(x, np.zeros(2), h=0.1), x)

    def test_straight_line(self):
        x = dubins_step(np.zeros(3), np.array([1.0, 0.0]), h=0.1)
        np.testing.assert_allclose(x, [0.1, 0.0, 0.0], atol=1e-15)

    def test_turn(self):
        x = dubins_step(np.zeros(3), np.array([1.0, 1.0]), h=0.1)
        np.testing.assert_allclose(x, [0.1, 0.0, 0.1], atol=1e-15)


class TestQuadrotor:
    def test_hover_balance(self):
        sys = Quadrotor()
        x = np.zeros(12)
        nxt = sys.step(x, sys.hover_thrusts())
        np.testing.assert_allclose(nxt, np.zeros(12), atol=1e-14)

    def test_free_fall(self):
        sys = Quadrotor(h=0.01)
        nxt = sys.step(np.zeros(12), np.zeros(4))
        assert nxt[8] == pytest.approx(-9.81 * 0.01, rel=1e-12)
        assert np.allclose(np.delete(nxt, 8), 0.0)

    def test_pure_yaw_torque(self):
        sys = Quadrotor(h=0.01)
        hover = sys.hover_thrusts()
        d = 0.05
        u = hover + np.array([d, -d, d, -d])
        nxt = sys.step(np.zeros(12), u)
        # only the body yaw rate responds in the first step
        assert abs(nxt[11]) > 1e-6
        np.testing.assert_allclose(np.delete(nxt, 11), 0.0, atol=1e-12)


class TestLinearization:
    def test_linear_system_is_its_own_linearization(self):
        rng = np.random.default_rng(0)
        sys = LinearSystem(rng.standard_normal((3, 3)), rng.standard_normal((3, 2)),
                           rng.standard_normal(3))
        lin = linearize_exact(sys, rng.standard_normal(3), rng.standard_normal(2))
        np.testing.assert_array_equal(lin.A, sys.A)
        np.testing.assert_array_equal(lin.B, sys.B)
        np.testing.assert_allclose(lin.c, sys.c, atol=1e-12)

    def test_affine_residual_identity(self):
        sys = Pendulum(damping=0.3, h=0.05)
        x, u = np.array([0.7, -0.4]), np.array([0.9])
        lin = linearize_exact(sys, x, u)
        f0 = sys.step(x, u)
        assert lin.residual(f0) <= 1e-8
        np.testing.assert_allclose(lin.predict(x, u), f0, atol=1e-12)

    def test_pendulum_structure(self):
        sys = Pendulum(mass=1.0, length=1.0, gravity=9.81, damping=0.1, h=0.01)
        lin = linearize_exact(sys, np.zeros(2), np.zeros(1))
        # leading-order structure of the semi-implicit step at the bottom
        assert lin.A[0, 1] == pytest.approx(0.01, rel=1e-2)
        assert lin.A[1, 0] == pytest.approx(-9.81 * 0.01, rel=1e-12)
        assert lin.A[1, 1] == pytest.approx(1.0 - 0.1 * 0.01, rel=1e-12)

    def test_dubins_velocity_coupling(self):
        sys = DubinsCar(h=0.1)
        lin = linearize_exact(sys, np.zeros(3), np.array([1.0, 0.0]))
        # dy+/dpsi = h * v at psi = 0
        assert lin.A[1, 2] == pytest.approx(0.1, rel=1e-12)

    @pytest.mark.parametrize("make", [
        lambda: Pendulum(damping=0.25, h=0.02),
        lambda: DubinsCar(h=0.1),
        lambda: Quadrotor(h=0.01),
    ])
    def test_analytic_jacobians_match_finite_differences(self, make):
        sys = make()
        rng = np.random.default_rng(42)
        for _ in range(100):
            x = rng.uniform(-1.0, 1.0, sys.state_dim)
            u = rng.uniform(-1.0, 1.0, sys.input_dim)
            if isinstance(sys, Quadrotor):
                x[3:6] *= 0.3          # stay away from the pitch singularity
                u = sys.hover_thrusts() + 0.2 * u
            a, b = sys.jacobians(x, u)
            a_fd, b_fd = finite_difference_jacobians(sys.step, x, u)
            np.testing.assert_allclose(a, a_fd, atol=1e-4)
            np.testing.assert_allclose(b, b_fd, atol=1e-4)
