"""Iterative trajectory optimization with bundled linearizations.

The optimizer alternates two passes until the cost settles: linearize the
dynamics at every knot of the current nominal trajectory (exactly, or with
the first/zero-order Jacobian bundle at the scheduled sampling variance),
then roll the true system forward, choosing each input by solving a
shrinking-horizon MPC quadratic program on the linearized model from the
state actually reached. There is no line search or trust region; smoothing
itself is the stabilizer, the variance schedule anneals it away, and
divergence is detected and reported rather than patched.

Per-knot sample seeds derive deterministically from (run seed, iteration,
knot index), so results are bit-identical regardless of how callers
parallelize the per-knot work.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from . import qp as _qp
from .errors import ConfigurationError
from .qp import QpProblem, QpSolution
from .smoothing import (SmoothingDistribution, jacobian_bundle_first_order,
                        jacobian_bundle_zero_order, variance_schedule)
from .systems import DynamicalSystem, LinearizedDynamics, linearize_exact

__all__ = [
    "MpcProblem",
    "GradientMode",
    "TrajectoryIterate",
    "ResultRecord",
    "MpcResult",
    "trajectory_cost",
    "rollout",
    "derive_knot_seed",
    "linearize_trajectory",
    "assemble_mpc_qp",
    "mpc_solve",
    "irs_lqr_run",
    "run_comparison",
]

GRADIENT_MODES = ("exact", "first_order_bundle", "zero_order_bundle")

_SLACK_WEIGHT = 1e6
_HESSIAN_RIDGE = 1e-8
_CONVERGENCE_RTOL = 1e-6
_CONVERGENCE_STREAK = 3
_DIVERGENCE_STREAK = 5


@dataclass
class MpcProblem:
    """Quadratic tracking problem over a finite horizon.

    Running state costs Q_t (PSD) and input costs R_t (PD) may be given as
    one matrix applied at every step or as per-step (T, n, n)/(T, m, m)
    stacks; Q_terminal weighs the final deviation. x_desired has T+1 rows.
    Optional linear inequalities C_u u <= d_u (t < T) and C_x x <= d_x
    (all t) apply at every step. start_index/initial_state select the MPC
    window: the subproblem starts at knot j from the given state.
    """

    horizon: int
    Q: np.ndarray
    R: np.ndarray
    Q_terminal: np.ndarray
    x_desired: np.ndarray
    C_u: np.ndarray | None = None
    d_u: np.ndarray | None = None
    C_x: np.ndarray | None = None
    d_x: np.ndarray | None = None
    start_index: int = 0
    initial_state: np.ndarray | None = None

    def __post_init__(self):
        T = int(self.horizon)
        if T < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {T}")
        self.Q_terminal = np.asarray(self.Q_terminal, dtype=float)
        n = self.Q_terminal.shape[0]
        self.Q = _per_step(self.Q, T, n, "Q")
        m = np.atleast_2d(np.asarray(self.R, dtype=float)).shape[-1]
        self.R = _per_step(self.R, T, m, "R")
        self.x_desired = np.asarray(self.x_desired, dtype=float)
        if self.x_desired.shape != (T + 1, n):
            raise ConfigurationError(
                f"x_desired must have shape {(T + 1, n)}, got {self.x_desired.shape}")
        for t in range(T):
            _check_psd(self.Q[t], f"Q[{t}]")
            _check_pd(self.R[t], f"R[{t}]")
        _check_psd(self.Q_terminal, "Q_terminal")
        if (self.C_u is None) != (self.d_u is None):
            raise ConfigurationError("C_u and d_u must be given together")
        if (self.C_x is None) != (self.d_x is None):
            raise ConfigurationError("C_x and d_x must be given together")
        if self.C_u is not None:
            self.C_u = np.atleast_2d(np.asarray(self.C_u, dtype=float))
            self.d_u = np.asarray(self.d_u, dtype=float).ravel()
        if self.C_x is not None:
            self.C_x = np.atleast_2d(np.asarray(self.C_x, dtype=float))
            self.d_x = np.asarray(self.d_x, dtype=float).ravel()
        if not 0 <= self.start_index < T:
            raise ConfigurationError(
                f"start_index must be in [0, {T - 1}], got {self.start_index}")
        if self.initial_state is not None:
            self.initial_state = np.asarray(self.initial_state, dtype=float)

    @property
    def state_dim(self) -> int:
        return self.Q_terminal.shape[0]

    @property
    def input_dim(self) -> int:
        return self.R.shape[-1]

    def window(self, start_index: int, initial_state) -> "MpcProblem":
        """Same problem re-anchored at knot start_index; skips re-validation."""
        clone = object.__new__(MpcProblem)
        clone.__dict__.update(self.__dict__)
        clone.start_index = int(start_index)
        clone.initial_state = np.asarray(initial_state, dtype=float)
        return clone


@dataclass(frozen=True)
class GradientMode:
    """How knot-point linearizations are produced.

    kind "exact" differentiates the dynamics; "first_order_bundle"
    averages Jacobians over sampled (state, input) perturbations;
    "zero_order_bundle" fits them by least squares on sampled steps.
    Bundle modes use `samples` draws per knot; per-knot seeds derive from
    the run seed (the only seed policy shipped).
    """

    kind: str = "exact"
    samples: int = 100
    seed_policy: str = "per_knot"

    def __post_init__(self):
        if self.kind not in GRADIENT_MODES:
            raise ConfigurationError(
                f"gradient mode must be one of {GRADIENT_MODES}, got {self.kind!r}")
        if self.samples < 1:
            raise ConfigurationError("sample count must be >= 1")
        if self.seed_policy != "per_knot":
            raise ConfigurationError("only the per_knot seed policy is implemented")


@dataclass(frozen=True)
class TrajectoryIterate:
    """One optimizer iterate: the rolled-out trajectory and its cost.

    xs has T+1 rows (knots satisfy the true dynamics exactly), us has T.
    `variance` is the joint sampling covariance used to linearize during
    the pass that produced this iterate (None for the initial rollout),
    `linearizations` those per-knot models.
    """

    xs: np.ndarray
    us: np.ndarray
    cost: float
    iteration: int
    variance: np.ndarray | None = None
    linearizations: list[LinearizedDynamics] | None = field(default=None, repr=False)
    infeasible_steps: int = 0


@dataclass(frozen=True)
class ResultRecord:
    """One (mode, seed, iteration) row of a benchmark comparison."""

    task: str
    mode: str
    seed: int
    iteration: int
    cost: float
    infeasible_steps: int
    diverged: bool


@dataclass(frozen=True)
class MpcResult:
    u: np.ndarray
    relaxed: bool
    qp: QpSolution


def trajectory_cost(iterate, mpc: MpcProblem) -> float:
    """Terminal plus running quadratic cost of a trajectory."""
    if isinstance(iterate, TrajectoryIterate):
        xs, us = iterate.xs, iterate.us
    else:
        xs, us = iterate
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    T = mpc.horizon
    if xs.shape[0] != T + 1 or us.shape[0] != T:
        raise ConfigurationError("trajectory length does not match the horizon")
    err = xs - mpc.x_desired
    total = float(err[T] @ mpc.Q_terminal @ err[T])
    for t in range(T):
        total += float(err[t] @ mpc.Q[t] @ err[t]) + float(us[t] @ mpc.R[t] @ us[t])
    return total


def rollout(sys: DynamicalSystem, x0, us) -> np.ndarray:
    """Integrate the true dynamics under an input sequence."""
    us = np.asarray(us, dtype=float)
    xs = np.empty((us.shape[0] + 1, np.asarray(x0).shape[0]))
    xs[0] = np.asarray(x0, dtype=float)
    for t in range(us.shape[0]):
        xs[t + 1] = sys.step(xs[t], us[t])
    return xs


def derive_knot_seed(run_seed: int, iteration: int, knot: int) -> int:
    """Deterministic per-knot sample seed; independent of evaluation order."""
    ss = np.random.SeedSequence([int(run_seed), int(iteration), int(knot)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def joint_covariance(cov0, mode: GradientMode, state_dim: int, input_dim: int) -> np.ndarray:
    """Joint (state, input) sampling covariance from a scalar variance or matrix.

    A scalar is the per-coordinate variance of the input perturbations; the
    zero-order mode also perturbs the state at the same variance (its
    regression needs excitation in every direction), while the first-order
    mode leaves states unperturbed by default. A full
    (state_dim+input_dim)^2 matrix is used as given.
    """
    cov0 = np.asarray(cov0, dtype=float)
    d = state_dim + input_dim
    if cov0.ndim == 0:
        var = float(cov0)
        diag = np.zeros(d)
        diag[state_dim:] = var
        if mode.kind == "zero_order_bundle":
            diag[:state_dim] = var
        return np.diag(diag)
    if cov0.shape == (d, d):
        return cov0
    raise ConfigurationError(
        f"covariance must be a scalar variance or a {(d, d)} matrix, got {cov0.shape}")


def linearize_trajectory(sys: DynamicalSystem, xs, us, mode: GradientMode,
                         covariance, run_seed: int, iteration: int
                         ) -> list[LinearizedDynamics]:
    """Per-knot linear models around a nominal trajectory.

    `covariance` is the joint (state, input) sampling covariance for the
    bundle modes. A zero covariance makes every mode take the exact path,
    so degenerate-variance runs of all modes are bit-identical.
    """
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    T = us.shape[0]
    lins = []
    dist = None
    if mode.kind != "exact":
        dist = SmoothingDistribution(covariance)
    for t in range(T):
        x_nom, u_nom = xs[t], us[t]
        if mode.kind == "exact" or dist.is_zero:
            lins.append(linearize_exact(sys, x_nom, u_nom))
            continue
        seed = derive_knot_seed(run_seed, iteration, t)
        if mode.kind == "first_order_bundle":
            a, b = jacobian_bundle_first_order(sys, x_nom, u_nom, dist, mode.samples, seed)
        else:
            a, b = jacobian_bundle_zero_order(sys, x_nom, u_nom, dist, mode.samples, seed)
        f0 = np.asarray(sys.step(x_nom, u_nom), dtype=float)
        c = f0 - a @ x_nom - b @ u_nom
        lins.append(LinearizedDynamics(A=a, B=b, c=c, x_nominal=x_nom, u_nominal=u_nom))
    return lins


def assemble_mpc_qp(mpc: MpcProblem, linearizations, relax_state_constraints=False
                    ) -> tuple[QpProblem, dict]:
    """Stacked QP over (x_j..x_T, u_j..u_{T-1}) for the MPC window.

    Dynamics enter as equality constraints x_{t+1} = A_t x_t + B_t u_t + c_t
    (one block per step of the window) along with the pinned initial state.
    With relax_state_constraints, state inequalities get quadratically
    penalized slack variables (weight 1e6) so an infeasible window still
    produces a usable input. A tiny ridge (1e-8) keeps the stacked Hessian
    positive definite when state costs are only PSD.
    """
    if mpc.initial_state is None:
        raise ConfigurationError("MpcProblem.initial_state must be set for an MPC solve")
    T, j = mpc.horizon, mpc.start_index
    n, m = mpc.state_dim, mpc.input_dim
    lins = list(linearizations)
    if len(lins) != T:
        raise ConfigurationError(f"need {T} knot linearizations, got {len(lins)}")
    W = T - j                       # dynamics steps in the window
    nx, nu = (W + 1) * n, W * m
    n_sx = (mpc.C_x.shape[0] * (W + 1)) if (relax_state_constraints and mpc.C_x is not None) else 0
    nz = nx + nu + n_sx

    blocks = [mpc.Q[t] for t in range(j, T)] + [mpc.Q_terminal] \
        + [mpc.R[t] for t in range(j, T)]
    P = 2.0 * block_diag(*blocks)
    P = block_diag(P, 2.0 * _SLACK_WEIGHT * np.eye(n_sx)) if n_sx else P
    P[np.diag_indices_from(P)] += _HESSIAN_RIDGE
    q = np.zeros(nz)
    for t in range(j, T):
        q[(t - j) * n:(t - j + 1) * n] = -2.0 * mpc.Q[t] @ mpc.x_desired[t]
    q[W * n:(W + 1) * n] = -2.0 * mpc.Q_terminal @ mpc.x_desired[T]

    A_eq = np.zeros((n + W * n, nz))
    b_eq = np.zeros(n + W * n)
    A_eq[:n, :n] = np.eye(n)
    b_eq[:n] = mpc.initial_state
    for t in range(j, T):
        r = n + (t - j) * n
        lin = lins[t]
        A_eq[r:r + n, (t - j + 1) * n:(t - j + 2) * n] = np.eye(n)
        A_eq[r:r + n, (t - j) * n:(t - j + 1) * n] = -lin.A
        A_eq[r:r + n, nx + (t - j) * m:nx + (t - j + 1) * m] = -lin.B
        b_eq[r:r + n] = lin.c

    g_rows, h_vals = [], []
    if mpc.C_u is not None:
        for t in range(j, T):
            row = np.zeros((mpc.C_u.shape[0], nz))
            row[:, nx + (t - j) * m:nx + (t - j + 1) * m] = mpc.C_u
            g_rows.append(row)
            h_vals.append(mpc.d_u)
    if mpc.C_x is not None:
        px = mpc.C_x.shape[0]
        for t in range(j, T + 1):
            row = np.zeros((px, nz))
            row[:, (t - j) * n:(t - j + 1) * n] = mpc.C_x
            if n_sx:
                s0 = nx + nu + (t - j) * px
                row[:, s0:s0 + px] = -np.eye(px)
            g_rows.append(row)
            h_vals.append(mpc.d_x)
        if n_sx:
            nonneg = np.zeros((n_sx, nz))
            nonneg[:, nx + nu:] = -np.eye(n_sx)
            g_rows.append(nonneg)
            h_vals.append(np.zeros(n_sx))
    G = np.vstack(g_rows) if g_rows else None
    h = np.concatenate(h_vals) if g_rows else None

    problem = QpProblem(P=P, q=q, G=G, h=h, A_eq=A_eq, b_eq=b_eq)
    layout = {"window": W, "n": n, "m": m, "first_input": nx,
              "dynamics_rows": W * n, "slack": n_sx}
    return problem, layout


def _condensed_window(mpc: MpcProblem, lins, relax_state_constraints: bool):
    """Reduced QP over the window's stacked inputs.

    Eliminating the dynamics equalities of the stacked QP analytically
    (states are affine in the inputs: x = F u + g) leaves a strictly
    convex problem in the inputs alone; R being positive definite makes
    the reduced Hessian positive definite with no ridge. Solutions agree
    with solve_qp on the stacked assembly to solver precision.
    """
    T, j = mpc.horizon, mpc.start_index
    n, m = mpc.state_dim, mpc.input_dim
    W = T - j
    nu = W * m
    F = np.zeros(((W + 1) * n, nu))
    g = np.empty((W + 1) * n)
    g[:n] = mpc.initial_state
    for t in range(j, T):
        r = (t - j) * n
        lin = lins[t]
        F[r + n:r + 2 * n, :] = lin.A @ F[r:r + n, :]
        F[r + n:r + 2 * n, (t - j) * m:(t - j + 1) * m] = lin.B
        g[r + n:r + 2 * n] = lin.A @ g[r:r + n] + lin.c
    q_blocks = [2.0 * mpc.Q[t] for t in range(j, T)] + [2.0 * mpc.Q_terminal]
    q_bar = block_diag(*q_blocks)
    xd = mpc.x_desired[j:T + 1].ravel()
    r_bar = block_diag(*[2.0 * mpc.R[t] for t in range(j, T)])
    P_r = F.T @ q_bar @ F + r_bar
    P_r = 0.5 * (P_r + P_r.T)
    q_r = F.T @ (q_bar @ (g - xd))

    n_sx = (mpc.C_x.shape[0] * (W + 1)) if (relax_state_constraints and mpc.C_x is not None) else 0
    if n_sx:
        P_r = block_diag(P_r, 2.0 * _SLACK_WEIGHT * np.eye(n_sx))
        q_r = np.concatenate([q_r, np.zeros(n_sx)])
    nz = nu + n_sx
    g_rows, h_vals = [], []
    if mpc.C_u is not None:
        for t in range(j, T):
            row = np.zeros((mpc.C_u.shape[0], nz))
            row[:, (t - j) * m:(t - j + 1) * m] = mpc.C_u
            g_rows.append(row)
            h_vals.append(mpc.d_u)
    if mpc.C_x is not None:
        px = mpc.C_x.shape[0]
        for t in range(j, T + 1):
            row = np.zeros((px, nz))
            row[:, :nu] = mpc.C_x @ F[(t - j) * n:(t - j + 1) * n, :]
            if n_sx:
                s0 = nu + (t - j) * px
                row[:, s0:s0 + px] = -np.eye(px)
            g_rows.append(row)
            h_vals.append(mpc.d_x - mpc.C_x @ g[(t - j) * n:(t - j + 1) * n])
        if n_sx:
            nonneg = np.zeros((n_sx, nz))
            nonneg[:, nu:] = -np.eye(n_sx)
            g_rows.append(nonneg)
            h_vals.append(np.zeros(n_sx))
    G = np.vstack(g_rows) if g_rows else np.zeros((0, nz))
    h = np.concatenate(h_vals) if g_rows else np.zeros(0)
    return P_r, q_r, G, h


def mpc_solve(mpc: MpcProblem, linearizations) -> MpcResult:
    """First optimal input of the shrinking-horizon MPC window.

    Solves the stacked MPC QP with its dynamics equalities eliminated in
    closed form (see _condensed_window). Infeasible windows are re-solved
    with penalized slack on the state inequalities and flagged.
    """
    if mpc.initial_state is None:
        raise ConfigurationError("MpcProblem.initial_state must be set for an MPC solve")
    lins = list(linearizations)
    if len(lins) != mpc.horizon:
        raise ConfigurationError(f"need {mpc.horizon} knot linearizations, got {len(lins)}")
    m = mpc.input_dim
    opt = _qp.SolverOptions()
    for relaxed in (False, True):
        P_r, q_r, G, h = _condensed_window(mpc, lins, relaxed)
        y, lam, _, status, iters = _qp._dual_active_set(P_r, q_r, G, h, opt)
        if status == "optimal":
            sol = QpSolution(z=y, ineq_duals=lam, eq_duals=np.zeros(0),
                             status=status, kkt_residual=0.0, iterations=iters)
            return MpcResult(u=y[:m], relaxed=relaxed, qp=sol)
        if status == "infeasible" and mpc.C_x is not None and not relaxed:
            continue
        raise RuntimeError(f"MPC subproblem failed with status {status!r}")
    raise RuntimeError("MPC subproblem infeasible even with relaxed state constraints")


def irs_lqr_run(sys: DynamicalSystem, mpc: MpcProblem, mode: GradientMode,
                cov0, schedule=("geometric", 0.7), max_iters: int = 20,
                seed: int = 0, u_init=None) -> list[TrajectoryIterate]:
    """Iterate bundle-linearization and MPC rollouts; returns all iterates.

    `cov0` is the initial sampling covariance (scalar variance or joint
    matrix, see joint_covariance); `schedule` a (policy, gamma) pair fed to
    variance_schedule. Stops at max_iters, when the relative cost change
    stays below 1e-6 for 3 iterations, or when the cost rises for 5
    consecutive iterations (divergence: reported, not patched, since the
    algorithm has no line search).
    """
    if mpc.initial_state is None:
        raise ConfigurationError("MpcProblem.initial_state must hold the start state")
    T = mpc.horizon
    n, m = mpc.state_dim, mpc.input_dim
    us = np.zeros((T, m)) if u_init is None else np.array(u_init, dtype=float)
    if us.shape != (T, m):
        raise ConfigurationError(f"u_init must have shape {(T, m)}")
    if mode.kind == "zero_order_bundle" and mode.samples < n + m:
        raise ConfigurationError(
            f"zero-order mode needs at least dim(x)+dim(u)={n + m} samples")
    policy, gamma = (schedule[0], schedule[1]) if len(schedule) > 1 else (schedule[0], 0.5)
    cov_joint0 = joint_covariance(cov0, mode, n, m)

    xs = rollout(sys, mpc.initial_state, us)
    history = [TrajectoryIterate(xs=xs, us=us.copy(),
                                 cost=trajectory_cost((xs, us), mpc), iteration=0)]
    flat_streak = 0
    rise_streak = 0
    for k in range(max_iters):
        cov_k = variance_schedule(cov_joint0, k, policy, gamma)
        lins = linearize_trajectory(sys, xs, us, mode, cov_k, seed, k)
        new_xs = np.empty_like(xs)
        new_us = np.empty_like(us)
        new_xs[0] = xs[0]
        infeasible = 0
        for t in range(T):
            window = mpc.window(t, new_xs[t])
            res = mpc_solve(window, lins)
            infeasible += int(res.relaxed)
            new_us[t] = res.u
            new_xs[t + 1] = sys.step(new_xs[t], new_us[t])
        xs, us = new_xs, new_us
        cost = trajectory_cost((xs, us), mpc)
        prev = history[-1].cost
        history.append(TrajectoryIterate(xs=xs, us=us.copy(), cost=cost,
                                         iteration=k + 1, variance=cov_k,
                                         linearizations=lins,
                                         infeasible_steps=infeasible))
        rise_streak = rise_streak + 1 if cost > prev else 0
        if rise_streak >= _DIVERGENCE_STREAK:
            break
        flat = abs(cost - prev) < _CONVERGENCE_RTOL * max(abs(prev), 1e-12)
        flat_streak = flat_streak + 1 if flat else 0
        if flat_streak >= _CONVERGENCE_STREAK:
            break
    return history


def run_comparison(sys: DynamicalSystem, mpc: MpcProblem, modes, seeds,
                   cov0, schedule=("geometric", 0.7), max_iters: int = 20,
                   u_init=None, task: str = "") -> tuple[list[ResultRecord], dict]:
    """Run every gradient mode over shared seeds; per-iteration cost table.

    Returns (records, extras) where records hold one row per
    (mode, seed, iteration) and extras maps (mode, seed) to the final
    iterate and the run's wall time. Wall times are excluded from the
    records so result tables stay byte-reproducible.
    """
    records: list[ResultRecord] = []
    extras: dict = {}
    for mode in modes:
        mode = mode if isinstance(mode, GradientMode) else GradientMode(kind=mode)
        for s in seeds:
            start = time.perf_counter()
            history = irs_lqr_run(sys, mpc, mode, cov0, schedule, max_iters,
                                  seed=int(s), u_init=u_init)
            elapsed = time.perf_counter() - start
            diverged = len(history) > _DIVERGENCE_STREAK and all(
                history[-i].cost > history[-i - 1].cost
                for i in range(1, _DIVERGENCE_STREAK + 1))
            for it in history:
                records.append(ResultRecord(task=task, mode=mode.kind, seed=int(s),
                                            iteration=it.iteration, cost=it.cost,
                                            infeasible_steps=it.infeasible_steps,
                                            diverged=diverged))
            extras[(mode.kind, int(s))] = {"final": history[-1], "wall_time": elapsed}
    return records, extras


def _per_step(mat, T: int, dim: int, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape == (dim, dim):
        return np.repeat(mat[None, :, :], T, axis=0)
    if mat.shape == (T, dim, dim):
        return mat
    raise ConfigurationError(
        f"{name} must be ({dim},{dim}) or ({T},{dim},{dim}), got {mat.shape}")


def _check_psd(mat: np.ndarray, name: str):
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ConfigurationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() < -1e-10:
        raise ConfigurationError(f"{name} must be positive semidefinite")


def _check_pd(mat: np.ndarray, name: str):
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ConfigurationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0.0:
        raise ConfigurationError(f"{name} must be positive definite")
