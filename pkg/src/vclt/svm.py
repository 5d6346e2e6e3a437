"""Soft-margin SVM dual solver (SMO with maximal-violating-pair selection).

Solves::

    min_a  0.5 * a' Q a - sum(a)    s.t.  0 <= a_i <= C,  y' a = 0

with ``Q_ij = y_i y_j K_ij``. The working pair is the maximal violating pair;
``np.argmax``/``np.argmin`` return the first hit, so ties go to the lower
sample index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NumericError, ParameterError

__all__ = ["DualSolution", "solve_svm_dual", "dual_objective"]

TAU = 1e-12


@dataclass
class DualSolution:
    alpha: np.ndarray
    coef: np.ndarray  # alpha_i * y_i
    bias: float
    objective: float
    n_iter: int
    gap: float


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Dual value ``sum(a) - 0.5 a'Qa`` (the quantity the SVM maximizes)."""
    beta = alpha * y
    return float(alpha.sum() - 0.5 * beta @ K @ beta)


@njit(cache=True)
def _smo_loop(K, y, alpha, G, C, tol, max_iter):
    """Run SMO in place on ``alpha`` and ``G``; returns (iterations, final gap).

    A negative iteration count signals that ``max_iter`` was exhausted.
    """
    n = y.shape[0]
    n_iter = 0
    while True:
        i = -1
        j = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            v = -y[t] * G[t]
            if y[t] > 0:
                is_up = alpha[t] < C
                is_low = alpha[t] > 0
            else:
                is_up = alpha[t] > 0
                is_low = alpha[t] < C
            # strict comparisons keep the lowest index among ties
            if is_up and v > g_max:
                g_max = v
                i = t
            if is_low and v < g_min:
                g_min = v
                j = t
        if i < 0 or j < 0:
            return n_iter, 0.0
        gap = g_max - g_min
        if gap < tol:
            return n_iter, gap
        if n_iter >= max_iter:
            return -1, gap
        n_iter += 1

        yi = y[i]
        yj = y[j]
        ai = alpha[i]
        aj = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad < TAU:
            quad = TAU
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        di = (ai - alpha[i]) * yi
        dj = (aj - alpha[j]) * yj
        alpha[i] = ai
        alpha[j] = aj
        # K is symmetric; row access is contiguous
        for t in range(n):
            G[t] += y[t] * (K[i, t] * di + K[j, t] * dj)


def solve_svm_dual(
    K: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-6,
    alpha0: np.ndarray | None = None,
    max_iter: int | None = None,
) -> DualSolution:
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if not np.array_equal(K, K.T):
        raise ParameterError("kernel matrix must be symmetric")
    if K.shape != (n, n):
        raise ParameterError(f"kernel matrix shape {K.shape} does not match {n} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ParameterError("labels must be +1/-1")
    if not C > 0:
        raise ParameterError(f"C must be positive, got {C}")
    if max_iter is None:
        max_iter = max(100_000, 200 * n)

    alpha = np.zeros(n) if alpha0 is None else np.clip(np.asarray(alpha0, dtype=float), 0.0, C)
    if alpha0 is not None and abs(alpha @ y) > 1e-9 * max(1.0, C * n):
        raise ParameterError("warm start violates y'a = 0")
    # gradient of the minimization form: Q a - 1
    G = y * (K @ (alpha * y)) - 1.0
    K = np.ascontiguousarray(K)
    n_iter, gap = _smo_loop(K, y, alpha, G, float(C), float(tol), int(max_iter))
    if n_iter < 0:
        raise NumericError(f"SMO did not reach tolerance {tol} in {max_iter} iterations (gap {gap:.3e})")

    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yG[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yG[up].max() if up.any() else yG[low].min()
        lo = yG[low].min() if low.any() else yG[up].max()
        bias = float(0.5 * (hi + lo))
    return DualSolution(alpha, alpha * y, bias, dual_objective(K, y, alpha), n_iter, float(gap))
