"""Quadrature support: Gauss-Laguerre rules with log-domain weights.

For large orders the classical Laguerre weights underflow double
precision (they decay like exp(-t_i) with t_i up to ~4n), so the rules
here return log-weights.  Nodes come from the symmetric tridiagonal
Jacobi matrix; log-weights from the derivative formula
w_i = t_i / ((n+1)^2 L_{n+1}(t_i)^2) with the Laguerre value evaluated
by a rescaled recurrence.
"""

import functools
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal


class QuadratureError(RuntimeError):
    """Quadrature refinement failed to converge."""

    def __init__(self, message, last=None, previous=None):
        super().__init__(message)
        self.last = last
        self.previous = previous


def _log_abs_laguerre(n, t):
    """log |L_n(t)| for an array of points, via rescaled upward recurrence."""
    t = np.asarray(t, dtype=float)
    prev = np.ones_like(t)
    cur = 1.0 - t
    off = np.zeros_like(t)
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - t) * cur - k * prev) / (k + 1)
        big = np.maximum(np.abs(prev), np.abs(cur))
        mask = big > 1e250
        if np.any(mask):
            scale = big[mask]
            prev[mask] /= scale
            cur[mask] /= scale
            off[mask] += np.log(scale)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(cur)) + off


@functools.lru_cache(maxsize=64)
def gauss_laguerre_log(order):
    """Nodes and log-weights of the order-point Gauss-Laguerre rule.

    Integrates f against exp(-t) on (0, inf):
    integral ~= sum_i exp(logw_i) f(t_i).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return np.array([1.0]), np.array([0.0])
    diag = 2.0 * np.arange(order) + 1.0
    offdiag = np.arange(1, order, dtype=float)
    nodes = eigh_tridiagonal(diag, offdiag, eigvals_only=True)
    logw = np.log(nodes) - 2.0 * math.log(order + 1) - 2.0 * _log_abs_laguerre(order + 1, nodes)
    return nodes, logw


def neville_to_zero(xs, ys):
    """Polynomial extrapolation of samples (x_i, y_i) to x = 0."""
    xs = list(map(float, xs))
    ys = list(map(float, ys))
    n = len(xs)
    tableau = list(ys)
    for level in range(1, n):
        for i in range(n - level):
            tableau[i] = (xs[i + level] * tableau[i] - xs[i] * tableau[i + 1]) / (
                xs[i + level] - xs[i]
            )
    return tableau[0]
