"""Discrete-time benchmark systems and exact linearization.

Ships the three smooth benchmark systems (pendulum, Dubins car, 12-state
quadrotor) plus a generic linear system, all behind a small stateless
DynamicalSystem interface: step(x, u) and jacobians(x, u). Jacobians fall
back to central finite differences (absolute step 1e-6) when a system does
not provide analytic ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DynamicalSystem",
    "LinearizedDynamics",
    "finite_difference_jacobians",
    "linearize_exact",
    "pendulum_step",
    "dubins_step",
    "quadrotor_step",
    "Pendulum",
    "DubinsCar",
    "Quadrotor",
    "LinearSystem",
]

FD_STEP = 1e-6


class DynamicalSystem:
    """Deterministic discrete-time dynamics x_{t+1} = step(x_t, u_t)."""

    state_dim: int
    input_dim: int

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(d step/dx, d step/du); default central finite differences."""
        return finite_difference_jacobians(self.step, x, u)


def finite_difference_jacobians(step, x, u, delta: float = FD_STEP):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = x.shape[0], u.shape[0]
    fx = np.asarray(step(x, u), dtype=float)
    a = np.empty((fx.shape[0], n))
    b = np.empty((fx.shape[0], m))
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        a[:, i] = (np.asarray(step(x + e, u)) - np.asarray(step(x - e, u))) / (2 * delta)
    for i in range(m):
        e = np.zeros(m)
        e[i] = delta
        b[:, i] = (np.asarray(step(x, u + e)) - np.asarray(step(x, u - e))) / (2 * delta)
    return a, b


@dataclass(frozen=True)
class LinearizedDynamics:
    """Affine model x_{t+1} ~ A x_t + B u_t + c around a nominal point.

    The offset satisfies c = step(x_nom, u_nom) - A x_nom - B u_nom, so the
    model is exact at the nominal point by construction.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    x_nominal: np.ndarray
    u_nominal: np.ndarray

    def predict(self, x, u):
        return self.A @ x + self.B @ u + self.c

    def residual(self, f_nominal) -> float:
        """|step(nominal) - (A x_nom + B u_nom + c)|, the defining identity."""
        return float(np.max(np.abs(
            np.asarray(f_nominal) - (self.A @ self.x_nominal
                                     + self.B @ self.u_nominal + self.c))))


def linearize_exact(sys: DynamicalSystem, x_nom, u_nom) -> LinearizedDynamics:
    """First-order Taylor model of the dynamics at (x_nom, u_nom)."""
    x_nom = np.asarray(x_nom, dtype=float)
    u_nom = np.asarray(u_nom, dtype=float)
    a, b = sys.jacobians(x_nom, u_nom)
    f0 = np.asarray(sys.step(x_nom, u_nom), dtype=float)
    c = f0 - a @ x_nom - b @ u_nom
    return LinearizedDynamics(A=a, B=b, c=c, x_nominal=x_nom, u_nominal=u_nom)


# ---------------------------------------------------------------------------
# pendulum


def pendulum_step(x, u, mass=1.0, length=1.0, gravity=9.81, damping=0.0, h=0.01):
    """Semi-implicit Euler step of a damped torque-driven pendulum.

    State (theta, omega), input torque. theta = 0 hangs down, theta = pi is
    upright. Acceleration (u - damping*omega - m g l sin(theta)) / (m l^2);
    the new velocity is used to advance the angle.
    """
    theta, omega = float(x[0]), float(x[1])
    torque = float(u[0])
    inertia = mass * length**2
    accel = (torque - damping * omega - mass * gravity * length * np.sin(theta)) / inertia
    omega_next = omega + h * accel
    theta_next = theta + h * omega_next
    return np.array([theta_next, omega_next])


class Pendulum(DynamicalSystem):
    state_dim = 2
    input_dim = 1

    def __init__(self, mass=1.0, length=1.0, gravity=9.81, damping=0.0, h=0.01):
        self.mass = mass
        self.length = length
        self.gravity = gravity
        self.damping = damping
        self.h = h

    def step(self, x, u):
        return pendulum_step(x, u, self.mass, self.length, self.gravity,
                             self.damping, self.h)

    def step_batch(self, xs, us):
        theta, omega = xs[:, 0], xs[:, 1]
        inertia = self.mass * self.length**2
        accel = (us[:, 0] - self.damping * omega
                 - self.mass * self.gravity * self.length * np.sin(theta)) / inertia
        omega_next = omega + self.h * accel
        return np.stack([theta + self.h * omega_next, omega_next], axis=1)

    def jacobians(self, x, u):
        h = self.h
        inertia = self.mass * self.length**2
        da_dth = -self.mass * self.gravity * self.length * np.cos(float(x[0])) / inertia
        da_dom = -self.damping / inertia
        # omega' = omega + h*accel; theta' = theta + h*omega'
        a = np.array([
            [1.0 + h * h * da_dth, h * (1.0 + h * da_dom)],
            [h * da_dth, 1.0 + h * da_dom],
        ])
        b = np.array([[h * h / inertia], [h / inertia]])
        return a, b

    def energy(self, x) -> float:
        theta, omega = float(x[0]), float(x[1])
        return (0.5 * self.mass * self.length**2 * omega**2
                + self.mass * self.gravity * self.length * (1.0 - np.cos(theta)))


# ---------------------------------------------------------------------------
# Dubins car


def dubins_step(x, u, h=0.1):
    """Explicit Euler step of the unicycle (px, py, heading) with input (v, w)."""
    px, py, psi = float(x[0]), float(x[1]), float(x[2])
    v, w = float(u[0]), float(u[1])
    return np.array([px + h * v * np.cos(psi),
                     py + h * v * np.sin(psi),
                     psi + h * w])


class DubinsCar(DynamicalSystem):
    state_dim = 3
    input_dim = 2

    def __init__(self, h=0.1):
        self.h = h

    def step(self, x, u):
        return dubins_step(x, u, self.h)

    def step_batch(self, xs, us):
        psi = xs[:, 2]
        return np.stack([xs[:, 0] + self.h * us[:, 0] * np.cos(psi),
                         xs[:, 1] + self.h * us[:, 0] * np.sin(psi),
                         psi + self.h * us[:, 1]], axis=1)

    def jacobians(self, x, u):
        psi = float(x[2])
        v = float(u[0])
        h = self.h
        a = np.array([
            [1.0, 0.0, -h * v * np.sin(psi)],
            [0.0, 1.0, h * v * np.cos(psi)],
            [0.0, 0.0, 1.0],
        ])
        b = np.array([
            [h * np.cos(psi), 0.0],
            [h * np.sin(psi), 0.0],
            [0.0, h],
        ])
        return a, b


# ---------------------------------------------------------------------------
# quadrotor


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float = 0.5
    arm_length: float = 0.17
    inertia: tuple[float, float, float] = (3.2e-3, 3.2e-3, 5.5e-3)
    drag_to_thrust: float = 0.016
    gravity: float = 9.81


def _euler_rate_matrix(roll, pitch):
    """Body angular velocity -> ZYX Euler angle rates."""
    sr, cr = np.sin(roll), np.cos(roll)
    tp = np.tan(pitch)
    cp = np.cos(pitch)
    return np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr / cp, cr / cp],
    ])


def _body_z_in_world(roll, pitch, yaw):
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    sy, cy = np.sin(yaw), np.cos(yaw)
    return np.array([cr * sp * cy + sr * sy,
                     cr * sp * sy - sr * cy,
                     cr * cp])


def _skew(a):
    return np.array([[0.0, -a[2], a[1]],
                     [a[2], 0.0, -a[0]],
                     [-a[1], a[0], 0.0]])


def quadrotor_step(x, u, params: QuadrotorParams = QuadrotorParams(), h=0.01):
    """Explicit Euler step of a 12-state rigid-body quadrotor.

    State: position (3), ZYX Euler angles (roll, pitch, yaw), world-frame
    linear velocity (3), body-frame angular velocity (3). Input: four rotor
    thrusts on a plus-configuration frame (+x, +y, -x, -y arms). Euler
    angles hit a coordinate singularity at pitch = +-pi/2; that is a
    documented domain boundary, not a handled case.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    pos, euler, vel, omega = x[0:3], x[3:6], x[6:9], x[9:12]
    roll, pitch, yaw = euler
    thrust = float(np.sum(u))
    larm = params.arm_length
    torque = np.array([
        larm * (u[1] - u[3]),
        larm * (u[2] - u[0]),
        params.drag_to_thrust * (u[0] - u[1] + u[2] - u[3]),
    ])
    inertia = np.asarray(params.inertia)
    accel = (thrust / params.mass) * _body_z_in_world(roll, pitch, yaw) \
        - np.array([0.0, 0.0, params.gravity])
    omega_dot = (torque - np.cross(omega, inertia * omega)) / inertia
    euler_dot = _euler_rate_matrix(roll, pitch) @ omega
    return np.concatenate([
        pos + h * vel,
        euler + h * euler_dot,
        vel + h * accel,
        omega + h * omega_dot,
    ])


class Quadrotor(DynamicalSystem):
    state_dim = 12
    input_dim = 4

    def __init__(self, params: QuadrotorParams = QuadrotorParams(), h=0.01):
        self.params = params
        self.h = h

    def step(self, x, u):
        return quadrotor_step(x, u, self.params, self.h)

    def hover_thrusts(self) -> np.ndarray:
        return np.full(4, self.params.mass * self.params.gravity / 4.0)

    def _mixing_matrix(self) -> np.ndarray:
        larm = self.params.arm_length
        kappa = self.params.drag_to_thrust
        return np.array([[0.0, larm, 0.0, -larm],
                         [-larm, 0.0, larm, 0.0],
                         [kappa, -kappa, kappa, -kappa]])

    def jacobians(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        h = self.h
        pr = self.params
        roll, pitch, yaw = x[3:6]
        omega = x[9:12]
        thrust = float(np.sum(u))
        inertia = np.asarray(pr.inertia)
        sr, cr = np.sin(roll), np.cos(roll)
        sp, cp = np.sin(pitch), np.cos(pitch)
        sy, cy = np.sin(yaw), np.cos(yaw)
        tp = sp / cp

        a = np.eye(12)
        b = np.zeros((12, 4))
        a[0:3, 6:9] = h * np.eye(3)

        # Euler kinematics block: e+ = e + h E(roll, pitch) omega
        de_droll = np.array([
            [0.0, cr * tp, -sr * tp],
            [0.0, -sr, -cr],
            [0.0, cr / cp, -sr / cp],
        ]) @ omega
        de_dpitch = np.array([
            [0.0, sr / cp**2, cr / cp**2],
            [0.0, 0.0, 0.0],
            [0.0, sr * sp / cp**2, cr * sp / cp**2],
        ]) @ omega
        a[3:6, 3] += h * de_droll
        a[3:6, 4] += h * de_dpitch
        a[3:6, 9:12] = h * _euler_rate_matrix(roll, pitch)

        # translational block: v+ = v + h (thrust/m) z_world(e) - h g z
        z_world = _body_z_in_world(roll, pitch, yaw)
        dz_droll = np.array([-sr * sp * cy + cr * sy, -sr * sp * sy - cr * cy, -sr * cp])
        dz_dpitch = np.array([cr * cp * cy, cr * cp * sy, -cr * sp])
        dz_dyaw = np.array([-cr * sp * sy + sr * cy, cr * sp * cy + sr * sy, 0.0])
        scale = h * thrust / pr.mass
        a[6:9, 3] = scale * dz_droll
        a[6:9, 4] = scale * dz_dpitch
        a[6:9, 5] = scale * dz_dyaw
        b[6:9, :] = (h / pr.mass) * z_world[:, None]

        # rotational block: w+ = w + h I^{-1} (tau(u) - w x (I w))
        gyro_jac = _skew(omega) @ np.diag(inertia) - _skew(inertia * omega)
        a[9:12, 9:12] = np.eye(3) - h * (gyro_jac / inertia[:, None])
        b[9:12, :] = h * self._mixing_matrix() / inertia[:, None]
        return a, b


# ---------------------------------------------------------------------------
# linear system


class LinearSystem(DynamicalSystem):
    """x_{t+1} = A x + B u + c; its own exact linearization everywhere."""

    def __init__(self, A, B, c=None):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.c = np.zeros(self.A.shape[0]) if c is None else np.asarray(c, dtype=float)
        self.state_dim = self.A.shape[0]
        self.input_dim = self.B.shape[1]

    def step(self, x, u):
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float) + self.c

    def step_batch(self, xs, us):
        return xs @ self.A.T + us @ self.B.T + self.c[None, :]

    def jacobians(self, x, u):
        return self.A.copy(), self.B.copy()
