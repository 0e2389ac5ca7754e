"""Binary soft-margin SVM trained by sequential minimal optimization.

Dual problem: min 0.5 a'Qa - e'a  s.t.  0 <= a_i <= C,  y'a = 0,  with
Q_ij = y_i y_j K(x_i, x_j). Working pairs are chosen by maximal violation for
``i`` and second-order gain for ``j``; the solver stops once the KKT violation
gap falls below ``tol``.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

TAU = 1e-12


def linear_kernel(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B.T


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int | None = None) -> tuple[np.ndarray, float]:
    """Return ``(alpha, b)`` so that f(x) = sum_i alpha_i y_i K(x_i, x) + b."""
    n = len(y)
    y = np.ascontiguousarray(y, dtype=float)
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * K, dtype=float)
    alpha = np.zeros(n)
    G = -np.ones(n)
    max_iter = max_iter if max_iter is not None else max(10_000_000 // max(n, 1), 100 * n)
    done = _smo_loop(Q, np.diag(Q).copy(), y, float(C), float(tol), int(max_iter), alpha, G)
    if not done:
        warnings.warn(f"SMO stopped after {max_iter} iterations without reaching tol={tol}", RuntimeWarning)
    return alpha, -_rho(alpha, G, y, C)


@njit(cache=True)
def _smo_loop(Q, QD, y, C, tol, max_iter, alpha, G):  # pragma: no cover - compiled
    """Update ``alpha`` and ``G`` in place; True once the KKT gap is below ``tol``."""
    n = len(y)
    for _ in range(max_iter):
        # i: maximal violator in I_up; g_min over I_low
        i = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            v = -y[t] * G[t]
            if y[t] > 0:
                up = alpha[t] < C
                low = alpha[t] > 0
            else:
                up = alpha[t] > 0
                low = alpha[t] < C
            if up and v > g_max:
                g_max = v
                i = t
            if low and v < g_min:
                g_min = v
        if i < 0 or g_min == np.inf:
            return True
        if g_max - g_min < tol:
            return True
        # j: second-order gain among violating members of I_low
        j = -1
        best = np.inf
        for t in range(n):
            if y[t] > 0:
                low = alpha[t] > 0
            else:
                low = alpha[t] < C
            diff = g_max + y[t] * G[t]
            if low and diff > 0:
                quad = QD[i] + QD[t] - 2.0 * y[i] * y[t] * Q[i, t]
                if quad <= 0:
                    quad = TAU
                gain = -(diff * diff) / quad
                if gain < best:
                    best = gain
                    j = t
        if j < 0:
            return True

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad_coef = QD[i] + QD[j] + 2.0 * Q[i, j]
            if quad_coef <= 0:
                quad_coef = TAU
            delta = (-G[i] - G[j]) / quad_coef
            d = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if d > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = d
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -d
            if d > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - d
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + d
        else:
            quad_coef = QD[i] + QD[j] - 2.0 * Q[i, j]
            if quad_coef <= 0:
                quad_coef = TAU
            delta = (G[i] - G[j]) / quad_coef
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = s
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += Q[i, t] * dai + Q[j, t] * daj
    return False


def _rho(alpha: np.ndarray, G: np.ndarray, y: np.ndarray, C: float) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    at_lower = alpha <= 0
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


class BinarySVM:
    def __init__(self, C: float = 1.0, kernel: str = "linear", gamma: float | None = None, tol: float = 1e-3):
        if kernel not in ("linear", "rbf"):
            raise ValueError(f"unsupported kernel {kernel!r}")
        self.C = float(C)
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kernel == "linear":
            return linear_kernel(A, B)
        return rbf_kernel(A, B, self.gamma)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "BinarySVM":
        X = np.asarray(X, dtype=float)
        if self.gamma is None:
            self.gamma = 1.0 / max(X.shape[1], 1)
        alpha, b = smo_solve(self._kernel(X, X), np.asarray(y), self.C, self.tol)
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * y)[sv]
        self.intercept_ = b
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if len(self.dual_coef_) == 0:
            return np.full(len(X), self.intercept_)
        return self._kernel(X, self.support_vectors_) @ self.dual_coef_ + self.intercept_

    def to_dict(self) -> dict:
        return {"C": self.C, "kernel": self.kernel, "gamma": self.gamma,
                "support_vectors": self.support_vectors_.tolist(), "dual_coef": self.dual_coef_.tolist(),
                "intercept": self.intercept_, "n_features": int(self.support_vectors_.shape[1])}

    @classmethod
    def from_dict(cls, d: dict) -> "BinarySVM":
        m = cls(C=d["C"], kernel=d["kernel"], gamma=d["gamma"])
        m.support_vectors_ = np.array(d["support_vectors"], dtype=float).reshape(-1, d["n_features"])
        m.dual_coef_ = np.array(d["dual_coef"], dtype=float)
        m.intercept_ = float(d["intercept"])
        return m
