"""Binary L2-regularized logistic regression solved by damped Newton iterations."""

from __future__ import annotations

import numpy as np


def logistic_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """0.5*||w||^2 + C * sum(log(1 + exp(-y * (X @ w + b)))), labels y in {-1, +1}."""
    margin = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.logaddexp(0.0, -margin).sum())


def logistic_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, C: float) -> tuple[np.ndarray, float]:
    margin = y * (X @ w + b)
    # d/dz log(1+exp(-y z)) = -y * sigmoid(-y z)
    coef = -y * _sigmoid(-margin)
    return w + C * (X.T @ coef), C * float(coef.sum())


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class BinaryLogisticRegression:
    def __init__(self, C: float = 1.0, tol: float = 1e-6, max_iter: int = 1000):
        self.C = float(C)
        self.tol = tol
        self.max_iter = max_iter
        self.coef_: np.ndarray | None = None
        self.intercept_ = 0.0
        self.n_iter_ = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "BinaryLogisticRegression":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        Xb = np.hstack([X, np.ones((n, 1))])
        theta = np.zeros(d + 1)
        reg = np.ones(d + 1)
        reg[-1] = 0.0  # intercept is not penalized
        f = logistic_objective(theta[:-1], theta[-1], X, y, self.C)
        for it in range(1, self.max_iter + 1):
            gw, gb = logistic_gradient(theta[:-1], theta[-1], X, y, self.C)
            grad = np.append(gw, gb)
            if np.linalg.norm(grad) <= self.tol:
                self.n_iter_ = it - 1
                break
            p = _sigmoid(Xb @ theta)
            H = (Xb.T * (self.C * p * (1.0 - p))) @ Xb + np.diag(reg)
            H[-1, -1] += 1e-12
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = grad
            t = 1.0
            while True:
                cand = theta - t * step
                f_new = logistic_objective(cand[:-1], cand[-1], X, y, self.C)
                if f_new <= f - 1e-4 * t * float(grad @ step) or t < 1e-10:
                    break
                t *= 0.5
            theta, f = cand, f_new
            self.n_iter_ = it
        self.coef_ = theta[:-1]
        self.intercept_ = float(theta[-1])
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def to_dict(self) -> dict:
        return {"C": self.C, "coef": self.coef_.tolist(), "intercept": self.intercept_}

    @classmethod
    def from_dict(cls, d: dict) -> "BinaryLogisticRegression":
        m = cls(C=d["C"])
        m.coef_ = np.array(d["coef"], dtype=float)
        m.intercept_ = float(d["intercept"])
        return m
