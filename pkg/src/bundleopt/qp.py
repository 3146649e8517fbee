"""Dense strictly-convex quadratic programming.

Solves  min 1/2 z'Pz + q'z  s.t.  Gz <= h,  A_eq z = b_eq  for small dense
problems with a positive-definite P. Equality constraints are eliminated
through a QR nullspace basis, and the reduced inequality-constrained
problem is solved with a dual active-set method: start at the
unconstrained optimum, repeatedly add the most violated inequality, taking
partial steps that drop constraints whose multipliers would go negative.
Step directions come from a cached Cholesky factor of the Hessian and the
Gram matrix of constraint normals, so each active-set iteration costs only
a small solve in the active set's dimension. Finite termination and
nonnegative multipliers are properties of the method; a final re-solve on
the optimal active set polishes primal and dual values to linear-algebra
precision.

Infeasibility is reported through the solution status, not an exception,
so model-predictive callers can degrade gracefully.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import ConfigurationError

__all__ = ["QpProblem", "QpSolution", "SolverOptions", "solve_qp", "kkt_residual"]

_MIN_EIG = 1e-9


@dataclass
class QpProblem:
    """min 1/2 z'Pz + q'z  s.t.  Gz <= h,  A_eq z = b_eq.

    P must be symmetric with minimum eigenvalue above 1e-9 (checked at
    construction via a shifted Cholesky factorization). A_eq is expected to
    have full row rank; inconsistent equalities surface as infeasibility.
    """

    P: np.ndarray
    q: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = self.q.shape[0]
        if self.P.shape != (n, n):
            raise ConfigurationError(f"P must be {n}x{n}, got {self.P.shape}")
        if not np.allclose(self.P, self.P.T, atol=1e-10 * max(1.0, np.abs(self.P).max())):
            raise ConfigurationError("P must be symmetric")
        try:
            np.linalg.cholesky(self.P - _MIN_EIG * np.eye(n))
        except np.linalg.LinAlgError:
            raise ConfigurationError(
                f"P must be positive definite with min eigenvalue > {_MIN_EIG}") from None
        if (self.G is None) != (self.h is None):
            raise ConfigurationError("G and h must be given together")
        if self.G is None:
            self.G = np.zeros((0, n))
            self.h = np.zeros(0)
        else:
            self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
            self.h = np.asarray(self.h, dtype=float).ravel()
            if self.G.shape != (self.h.shape[0], n):
                raise ConfigurationError(
                    f"G/h shapes {self.G.shape}/{self.h.shape} inconsistent with n={n}")
        if (self.A_eq is None) != (self.b_eq is None):
            raise ConfigurationError("A_eq and b_eq must be given together")
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
            if self.A_eq.shape != (self.b_eq.shape[0], n):
                raise ConfigurationError(
                    f"A_eq/b_eq shapes {self.A_eq.shape}/{self.b_eq.shape} "
                    f"inconsistent with n={n}")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def objective(self, z: np.ndarray) -> float:
        return float(0.5 * z @ self.P @ z + self.q @ z)


@dataclass
class QpSolution:
    z: np.ndarray
    ineq_duals: np.ndarray
    eq_duals: np.ndarray
    status: str                       # "optimal" | "infeasible" | "max_iter"
    kkt_residual: float
    iterations: int = 0


@dataclass
class SolverOptions:
    max_iter: int = 0                 # 0 -> automatic (scales with constraint count)
    feas_tol: float = 1e-10
    step_tol: float = 1e-12


def solve_qp(problem: QpProblem, options: SolverOptions | None = None) -> QpSolution:
    """Solve the QP; never raises on infeasibility (reported via status)."""
    opt = options or SolverOptions()
    P, q, G, h = problem.P, problem.q, problem.G, problem.h
    A, b = problem.A_eq, problem.b_eq
    n, m, p = problem.n, G.shape[0], A.shape[0]

    if p == 0:
        y, lam, active, status, iters = _dual_active_set(P, q, G, h, opt)
        return _package(problem, y, lam, np.zeros(0), status, iters)

    # Eliminate equalities: z = z_part + Z y with A_eq Z = 0.
    q_full, r_full = np.linalg.qr(A.T, mode="complete")
    r1 = r_full[:p, :]
    diag = np.abs(np.diag(r1))
    if diag.size and diag.min() <= 1e-12 * max(1.0, diag.max()):
        z_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.max(np.abs(A @ z_ls - b)) > 1e-8 * max(1.0, float(np.abs(b).max())):
            return _package(problem, None, None, None, "infeasible", 0)
        raise ConfigurationError("A_eq must have full row rank")
    z_part = q_full[:, :p] @ solve_triangular(r1.T, b, lower=True)
    basis = q_full[:, p:]
    iters = 0
    if basis.shape[1] == 0:
        feasible = m == 0 or np.max(G @ z_part - h) <= max(opt.feas_tol, 1e-9)
        status = "optimal" if feasible else "infeasible"
        y = np.zeros(0) if feasible else None
        lam = np.zeros(m) if feasible else None
    else:
        p_red = basis.T @ P @ basis
        p_red = 0.5 * (p_red + p_red.T)
        q_red = basis.T @ (P @ z_part + q)
        g_red = G @ basis
        h_red = h - G @ z_part
        y, lam, _, status, iters = _dual_active_set(p_red, q_red, g_red, h_red, opt)
    if status == "infeasible":
        return _package(problem, None, None, None, status, iters)
    z = z_part + (basis @ y if y.size else 0.0)
    resid = P @ z + q + G.T @ lam
    nu = solve_triangular(r1, q_full[:, :p].T @ (-resid), lower=False)
    sol = QpSolution(z, lam, nu, status, 0.0, iters)
    sol.kkt_residual = kkt_residual(problem, sol)
    return sol


def kkt_residual(problem: QpProblem, sol: QpSolution) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    z, lam, nu = sol.z, sol.ineq_duals, sol.eq_duals
    if z.shape[0] != problem.n or lam.shape[0] != problem.G.shape[0] \
            or nu.shape[0] != problem.A_eq.shape[0]:
        raise ConfigurationError("solution dimensions do not match the problem")
    stat = problem.P @ z + problem.q + problem.G.T @ lam + problem.A_eq.T @ nu
    parts = [float(np.max(np.abs(stat))) if stat.size else 0.0]
    if problem.G.shape[0]:
        slack = problem.G @ z - problem.h
        parts.append(float(max(0.0, np.max(slack))))
        parts.append(float(max(0.0, -np.min(lam))))
        parts.append(float(np.max(np.abs(lam * slack))))
    if problem.A_eq.shape[0]:
        parts.append(float(np.max(np.abs(problem.A_eq @ z - problem.b_eq))))
    return max(parts)


def _dual_active_set(P, q, G, h, opt: SolverOptions):
    """Active-set loop on an inequality-only strictly convex QP.

    Returns (z, ineq_duals, active, status, iterations); z and the duals
    are polished by a final KKT re-solve on the optimal active set.
    """
    n, m = q.shape[0], G.shape[0]
    max_iter = opt.max_iter or (25 + 10 * (m + 1))
    cho = cho_factor(P, check_finite=False)
    z_free = -cho_solve(cho, q, check_finite=False)
    z = z_free
    if m == 0:
        return z, np.zeros(0), [], "optimal", 1
    pig = gram = None                  # built lazily on the first violation
    active: list[int] = []
    lam_active: list[float] = []
    iters = 0

    while iters < max_iter:
        iters += 1
        resid = G @ z - h
        if active:
            resid[np.array(active)] = 0.0     # kept exactly active
        worst = int(np.argmax(resid))
        if resid[worst] <= opt.feas_tol:
            return _polish(G, h, z_free, pig, gram, active, "optimal", iters)
        if pig is None:
            pig = cho_solve(cho, G.T, check_finite=False)  # P^{-1} G'
            gram = G @ pig             # Gram matrix of normals in P^{-1} metric
        violation = resid[worst]
        denom_tol = opt.step_tol * max(1.0, float(gram[worst, worst]))
        lam_new = 0.0                     # accumulates over partial steps

        while True:
            if active:
                idx = np.array(active)
                r = np.linalg.solve(gram[np.ix_(idx, idx)], gram[idx, worst])
                u = pig[:, worst] - pig[:, idx] @ r
                denom = float(gram[worst, worst] - gram[idx, worst] @ r)
            else:
                r = np.zeros(0)
                u = pig[:, worst]
                denom = float(gram[worst, worst])
            t_primal = violation / denom if denom > denom_tol else np.inf
            t_dual = np.inf
            blocker = -1
            for k, (lam_i, r_i) in enumerate(zip(lam_active, r)):
                if r_i > opt.step_tol and lam_i / r_i < t_dual:
                    t_dual = lam_i / r_i
                    blocker = k
            t = min(t_primal, t_dual)
            if not np.isfinite(t):
                return None, None, active, "infeasible", iters
            z = z - t * u
            lam_active = [li - t * ri for li, ri in zip(lam_active, r)]
            lam_new += t
            violation -= t * denom
            if t_dual < t_primal:
                del active[blocker], lam_active[blocker]
                continue
            active.append(worst)
            lam_active.append(lam_new)
            break

    return _polish(G, h, z_free, pig, gram, active, "max_iter", iters)


def _polish(G, h, z_free, pig, gram, active, status, iters):
    """Exact re-solve on the final active set (from the cached factors)."""
    m = G.shape[0]
    if not active:
        return z_free, np.zeros(m), active, status, iters
    idx = np.array(active)
    s_act = gram[np.ix_(idx, idx)]
    lam_act = np.linalg.solve(s_act, G[idx] @ z_free - h[idx])
    z = z_free - pig[:, idx] @ lam_act
    lam = np.zeros(m)
    lam[idx] = lam_act
    return z, lam, active, status, iters


def _package(problem: QpProblem, z, lam, nu, status, iters) -> QpSolution:
    n, m, p = problem.n, problem.G.shape[0], problem.A_eq.shape[0]
    if status == "infeasible" or z is None:
        return QpSolution(np.full(n, np.nan), np.full(m, np.nan), np.full(p, np.nan),
                          "infeasible", float("nan"), iters)
    sol = QpSolution(z, lam, nu if nu is not None else np.zeros(p), status, 0.0, iters)
    sol.kkt_residual = kkt_residual(problem, sol)
    return sol
