"""Independent reference implementations used to check the package.

Everything here deliberately avoids the code paths under test: closed-form
Gaussian-smoothing identities, brute-force active-set enumeration for QPs,
an affine Riccati recursion for finite-horizon tracking LQR, and a
complementarity-enumeration solver for the 1D contact step.
"""

import itertools
import math

import numpy as np
from scipy.stats import norm


# ---------------------------------------------------------------------------
# closed-form Gaussian smoothing of the catalog test functions


def smoothed_wiggly(x, sigma):
    """E[(x+w)^2 + 0.1 sin(20(x+w))] and its derivative, w ~ N(0, sigma^2)."""
    damp = math.exp(-200.0 * sigma**2)
    value = x**2 + sigma**2 + 0.1 * damp * np.sin(20.0 * x)
    grad = 2.0 * x + 2.0 * damp * np.cos(20.0 * x)
    return value, grad


def smoothed_heaviside(x, sigma):
    value = norm.cdf(x / sigma)
    grad = norm.pdf(x / sigma) / sigma
    return value, grad


def smoothed_vee(x, sigma):
    """vee(x) = |x| - 2*H(x) + 1 smoothed against N(0, sigma^2)."""
    e_abs = x * math.erf(x / (sigma * math.sqrt(2.0))) \
        + sigma * math.sqrt(2.0 / math.pi) * math.exp(-x**2 / (2.0 * sigma**2))
    value = e_abs - 2.0 * norm.cdf(x / sigma) + 1.0
    grad = math.erf(x / (sigma * math.sqrt(2.0))) - 2.0 * norm.pdf(x / sigma) / sigma
    return value, grad


CLOSED_FORMS = {
    "wiggly_quadratic": smoothed_wiggly,
    "heaviside": smoothed_heaviside,
    "vee": smoothed_vee,
}


# ---------------------------------------------------------------------------
# brute-force QP oracle


def enumerate_qp(P, q, G, h, A_eq=None, b_eq=None, tol=1e-9):
    """Global optimum by trying every active set; None if infeasible.

    Returns (objective, z, duals) for the best KKT-consistent candidate.
    """
    n = q.shape[0]
    m = G.shape[0] if G is not None else 0
    G = np.zeros((0, n)) if G is None else G
    h = np.zeros(0) if h is None else h
    A_eq = np.zeros((0, n)) if A_eq is None else A_eq
    b_eq = np.zeros(0) if b_eq is None else b_eq
    p = A_eq.shape[0]
    best = None
    for r in range(m + 1):
        if p + r > n:
            break
        for subset in map(list, itertools.combinations(range(m), r)):
            N = np.vstack([A_eq, G[subset]])
            k = N.shape[0]
            kkt = np.block([[P, N.T], [N, np.zeros((k, k))]]) if k else P
            rhs = np.concatenate([-q, b_eq, h[subset]]) if k else -q
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            z = sol[:n]
            lam_subset = sol[n + p:]
            if k and np.max(np.abs(N @ z - rhs[n:])) > 1e-7:
                continue                      # singular system, garbage solve
            if m and np.any(G @ z - h > tol):
                continue
            if np.any(lam_subset < -tol):
                continue
            obj = 0.5 * z @ P @ z + q @ z
            if best is None or obj < best[0] - 1e-12:
                lam = np.zeros(m)
                lam[subset] = lam_subset
                best = (obj, z, lam)
    return best


def random_qp(rng, n_max=6, m_max=8, with_equalities=False):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    M = rng.standard_normal((n, n))
    P = M.T @ M + np.eye(n)
    q = rng.standard_normal(n)
    G = rng.standard_normal((m, n))
    h = G @ rng.standard_normal(n) + rng.uniform(-0.5, 1.0, m)
    A = b = None
    if with_equalities and n >= 2:
        p = int(rng.integers(1, n))
        A = rng.standard_normal((p, n))
        b = rng.standard_normal(p)
    return P, q, G, h, A, b


# ---------------------------------------------------------------------------
# finite-horizon tracking LQR (affine dynamics) by backward recursion


def riccati_tracking(A, B, c, Q, R, Q_terminal, x_desired, x0):
    """Optimal cost and first input for the affine tracking problem.

    Cost: sum_t (x_t - xd_t)'Q(x_t - xd_t) + u_t'Ru_t plus the terminal
    term, dynamics x_{t+1} = A x_t + B u_t + c. Value functions are kept as
    V_t(x) = x'Sx + 2s'x + k.
    """
    T = x_desired.shape[0] - 1
    n = A.shape[0]
    S = Q_terminal.copy()
    s = -Q_terminal @ x_desired[T]
    k = float(x_desired[T] @ Q_terminal @ x_desired[T])
    first_u = None
    for t in reversed(range(T)):
        M = R + B.T @ S @ B
        P2 = B @ np.linalg.solve(M, B.T)
        W = S - S @ P2 @ S
        v = S @ c + s
        S_new = Q + A.T @ W @ A
        s_new = -Q @ x_desired[t] + A.T @ (W @ c + (np.eye(n) - S @ P2) @ s)
        k_new = float(x_desired[t] @ Q @ x_desired[t] + c @ S @ c + 2 * s @ c
                      + k - v @ P2 @ v)
        if t == 0:
            first_u = -np.linalg.solve(M, B.T @ (S @ (A @ x0 + c) + s))
        S, s, k = S_new, s_new, k_new
    return float(x0 @ S @ x0 + 2 * s @ x0 + k), first_u


# ---------------------------------------------------------------------------
# 1D contact LCP oracle


def lcp_oracle_1d(xu, xa, command, m, h, k):
    """Solve the 1D contact step by enumerating both complementarity modes.

    Each mode's linear system is solved numerically and kept only if its
    inequality holds (gap >= 0 for separation, impulse >= 0 for contact);
    the first valid mode in the order (separation, contact) is returned as
    (xu_next, xa_next, impulse, mode).
    """
    del xa  # the robot's current position does not enter either mode
    candidates = []
    # separation: impulse = 0; the robot balance h*k*(command - xa_next) = 0
    # puts the robot on its command; valid if the resulting gap is >= 0.
    if xu - command >= 0.0:
        candidates.append((xu, command, 0.0, "separation"))
    # contact: unknowns (xu_next, xa_next, impulse) from
    #   m*(xu_next - xu)/h - impulse = 0        (box momentum)
    #   -impulse + h*k*(command - xa_next) = 0  (robot force balance)
    #   xu_next - xa_next = 0                   (touching)
    mat = np.array([[m / h, 0.0, -1.0],
                    [0.0, -h * k, -1.0],
                    [1.0, -1.0, 0.0]])
    rhs = np.array([m / h * xu, -h * k * command, 0.0])
    xu_next, xa_next, impulse = np.linalg.solve(mat, rhs)
    if impulse >= 0.0:
        candidates.append((float(xu_next), float(xa_next), float(impulse), "contact"))
    assert candidates, "complementarity problem has a solution by construction"
    return candidates[0]


# ---------------------------------------------------------------------------
# Gaussian blend of the 1D contact Jacobian (piecewise-constant Jacobians)


def blended_jacobian_1d(xu, command, sigma, c_ratio):
    """Expected (A, B) of the two-piece pusher under N(command, sigma^2).

    The Jacobian is piecewise constant in the command, so its Gaussian
    average is the contact-probability blend of the two pieces.
    """
    p_contact = norm.cdf((command - xu) / sigma) if sigma > 0 else float(command >= xu)
    s = 1.0 / (1.0 + c_ratio)
    a_sep = np.array([[1.0, 0.0], [0.0, 0.0]])
    b_sep = np.array([[0.0], [1.0]])
    a_con = np.array([[c_ratio * s, 0.0], [c_ratio * s, 0.0]])
    b_con = np.array([[s], [s]])
    a = p_contact * a_con + (1.0 - p_contact) * a_sep
    b = p_contact * b_con + (1.0 - p_contact) * b_sep
    return a, b
