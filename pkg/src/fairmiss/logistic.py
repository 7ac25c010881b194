"""L2-regularized logistic regression fitted by damped IRLS (Newton with step halving).

The objective is the mean negative log-likelihood plus ``lam / 2 * ||w||^2``;
the intercept is not penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 100
STEP_TOL = 1e-8


def _log1pexp(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-_log1pexp(-z))


def loss(params: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    b, w = params[0], params[1:]
    z = X @ w + b
    # -[y log p + (1-y) log(1-p)] = log(1 + e^z) - y z
    return float(np.mean(_log1pexp(z) - y * z) + 0.5 * lam * (w @ w))


def gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    b, w = params[0], params[1:]
    r = sigmoid(X @ w + b) - y
    n = len(y)
    return np.concatenate(([r.sum() / n], X.T @ r / n + lam * w))


def hessian(params: np.ndarray, X: np.ndarray, lam: float) -> np.ndarray:
    b, w = params[0], params[1:]
    p = sigmoid(X @ w + b)
    d = p * (1 - p)
    Xt = np.column_stack([np.ones(len(X)), X])
    H = (Xt * d[:, None]).T @ Xt / len(X)
    H[np.diag_indices_from(H)] += np.r_[0.0, np.full(X.shape[1], lam)]
    return H


@dataclass
class LogisticFit:
    params: np.ndarray  # intercept first
    n_iter: int
    converged: bool
    loss: float

    @property
    def intercept(self) -> float:
        return float(self.params[0])

    @property
    def coef(self) -> np.ndarray:
        return self.params[1:]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.params[1:] + self.params[0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 0.0,
    max_iter: int = MAX_ITER,
    tol: float = STEP_TOL,
) -> LogisticFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = np.zeros(X.shape[1] + 1)
    mean_y = y.mean()
    if 0 < mean_y < 1:
        params[0] = np.log(mean_y / (1 - mean_y))
    cur = loss(params, X, y, lam)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(params, X, y, lam)
        H = hessian(params, X, lam)
        H[np.diag_indices_from(H)] += 1e-10
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while True:
            cand = params - t * step
            new = loss(cand, X, y, lam)
            if new <= cur or t < 1e-10:
                break
            t *= 0.5
        delta = np.max(np.abs(cand - params)) if cand.size else 0.0
        if new <= cur:
            params, cur = cand, new
        if delta < tol:
            converged = True
            break
    return LogisticFit(params, it, converged, cur)
