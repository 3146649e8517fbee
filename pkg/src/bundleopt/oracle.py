"""High-accuracy quadrature of Gaussian-smoothed functions.

`convolution_oracle` evaluates the smoothed value and gradient of a scalar
function by numerical quadrature instead of Monte Carlo. It exists as an
independent reference for testing the sampling estimators, and is limited
to Gaussian perturbations in dimension <= 3.

Smooth integrands use tensor Gauss-Hermite quadrature. One-dimensional
functions that declare breakpoints (kinks or jumps) are instead integrated
piece by piece with adaptive quadrature, since polynomial rules lose their
accuracy on non-smooth integrands. The gradient comes from quadrature of
the function's own gradient when it is continuous, and otherwise from the
score-function identity  d/dx E[f(x+w)] = E[f(x+w) w] / sigma^2,  which
also captures jump discontinuities.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import ConfigurationError
from .smoothing import SmoothingDistribution, _eval_batch, _grad_batch

__all__ = ["convolution_oracle", "gauss_hermite_expectation"]

_TAIL_SIGMAS = 13.0


def convolution_oracle(f, x, dist: SmoothingDistribution,
                       quadrature_points: int = 201) -> tuple[float, np.ndarray]:
    """Quadrature value and gradient of the smoothed function at x.

    Returns (value, gradient) where value = E_w[f(x+w)] and gradient is its
    derivative with respect to x. `f` may carry `breakpoints`, `continuous`
    and `gradient` attributes (see functions.TestFunction); bare callables
    are treated as smooth.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[0]
    if dist.dimension != d:
        raise ConfigurationError(
            f"distribution dimension {dist.dimension} != point dimension {d}")
    if d > 3:
        raise ConfigurationError("convolution oracle supports dimension <= 3 only")
    if dist.is_zero:
        raise ConfigurationError("convolution oracle needs a nonzero covariance")

    grad_f = getattr(f, "gradient", None)
    continuous = bool(getattr(f, "continuous", True))
    breakpoints = tuple(getattr(f, "breakpoints", ()))

    if d == 1:
        sigma = math.sqrt(float(dist.covariance[0, 0]))
        value = _piecewise_1d(f, float(x[0]), sigma, breakpoints, moment=0)
        if continuous and grad_f is not None:
            grad = _piecewise_1d(grad_f, float(x[0]), sigma, breakpoints, moment=0)
        else:
            grad = _piecewise_1d(f, float(x[0]), sigma, breakpoints, moment=1) / sigma**2
        return value, np.array([grad])

    value = gauss_hermite_expectation(f, x, dist, quadrature_points)
    if continuous and grad_f is not None:
        grad = gauss_hermite_expectation(grad_f, x, dist, quadrature_points,
                                         output_dim=d)
    else:
        cov_inv = np.linalg.inv(dist.covariance)
        grad = cov_inv @ gauss_hermite_expectation(
            f, x, dist, quadrature_points, weight_by_offset=True)
    return float(value), np.asarray(grad, dtype=float)


def gauss_hermite_expectation(f, x, dist: SmoothingDistribution, points: int,
                              output_dim: int | None = None,
                              weight_by_offset: bool = False):
    """Tensor Gauss-Hermite approximation of E_w[f(x+w)] (or E[f(x+w) w])."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[0]
    nodes, weights = np.polynomial.hermite.hermgauss(points)
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    xi = np.stack([g.ravel() for g in grids], axis=-1)      # (points**d, d)
    wgt = np.ones(xi.shape[0])
    for g in np.meshgrid(*([weights] * d), indexing="ij"):
        wgt = wgt * g.ravel()
    wgt = wgt / math.pi ** (d / 2.0)
    offsets = math.sqrt(2.0) * xi @ dist._factor.T
    pts = x[None, :] + offsets
    if output_dim is not None:
        vals = _grad_batch(f, pts)                          # (q, d)
        return vals.T @ wgt
    vals = _eval_batch(f, pts)
    if weight_by_offset:
        return offsets.T @ (wgt * vals)
    return float(wgt @ vals)


def _piecewise_1d(f, x: float, sigma: float, breakpoints: tuple[float, ...],
                  moment: int) -> float:
    """Adaptive quadrature of f(x+w) * w**moment against the Gaussian pdf."""
    lo, hi = -_TAIL_SIGMAS * sigma, _TAIL_SIGMAS * sigma
    cuts = sorted(b - x for b in breakpoints if lo < b - x < hi)
    edges = [lo, *cuts, hi]
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    vectorized = getattr(f, "vectorized", False)

    def integrand(w):
        arg = (x + w) if vectorized else np.array([x + w])
        val = float(np.asarray(f(arg), dtype=float))
        return val * w**moment * norm * math.exp(-0.5 * (w / sigma) ** 2)

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        part, _ = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += part
    return total
