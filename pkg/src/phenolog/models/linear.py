"""Logistic regression and ordinary least squares, hand-rolled.

The logistic trainer minimizes the L2-penalized mean negative
log-likelihood by full-batch gradient descent with backtracking line
search, stopping at gradient infinity-norm below 1e-6 (or 10,000 steps).
The intercept is never penalized. OLS solves via SVD-backed least
squares, with a tiny-ridge fallback when underdetermined.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

LOGISTIC_GRAD_TOL = 1e-6
LOGISTIC_MAX_ITER = 10_000


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogisticModel:
    coef: np.ndarray
    intercept: float
    converged: bool
    iterations: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(np.asarray(x, dtype=float) @ self.coef + self.intercept)


def _logistic_objective(w: np.ndarray, x1: np.ndarray, y: np.ndarray, l2: float):
    """(objective, gradient) for w = [intercept, coef] on [1|X]."""
    n = x1.shape[0]
    z = x1 @ w
    # log(1 + exp(-s.z)) computed stably
    s = 2.0 * y - 1.0
    m = -s * z
    nll = float(np.logaddexp(0.0, m).sum()) / n
    p = sigmoid(z)
    grad = x1.T @ (p - y) / n
    penalty = 0.5 * l2 * float(w[1:] @ w[1:])
    grad_pen = l2 * np.concatenate([[0.0], w[1:]])
    return nll + penalty, grad + grad_pen


def fit_logistic(
    x: np.ndarray,
    y: np.ndarray,
    l2: float = 0.01,
    max_iter: int = LOGISTIC_MAX_ITER,
    grad_tol: float = LOGISTIC_GRAD_TOL,
) -> LogisticModel:
    """Gradient descent with backtracking; expects standardized inputs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    if np.unique(y).size < 2:
        raise ValueError("both classes must be present")
    x1 = np.column_stack([np.ones(x.shape[0]), x])
    w = np.zeros(x1.shape[1])
    obj, grad = _logistic_objective(w, x1, y, l2)
    step = 1.0
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        if float(np.abs(grad).max()) < grad_tol:
            converged = True
            break
        # backtracking line search on the Armijo condition
        direction = -grad
        slope = float(grad @ direction)
        trial_step = min(step * 2.0, 1e4)
        accepted = False
        while trial_step > 1e-14:
            w_new = w + trial_step * direction
            obj_new, grad_new = _logistic_objective(w_new, x1, y, l2)
            if obj_new <= obj + 1e-4 * trial_step * slope:
                accepted = True
                break
            trial_step *= 0.5
        if not accepted:
            break  # stalled: no descent step representable
        w, obj, grad = w_new, obj_new, grad_new
        step = trial_step
    if not converged:
        converged = float(np.abs(grad).max()) < grad_tol
    return LogisticModel(
        coef=w[1:].copy(), intercept=float(w[0]), converged=converged, iterations=iterations
    )


@dataclass(frozen=True)
class LinearModel:
    coef: np.ndarray
    intercept: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.coef + self.intercept


def fit_ols(x: np.ndarray, y: np.ndarray, ridge_fallback: float = 1e-6) -> LinearModel:
    """Least squares with intercept; tiny ridge when n <= p."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("OLS inputs must be finite")
    n, p = x.shape
    x1 = np.column_stack([np.ones(n), x])
    if n > p:
        w, *_ = np.linalg.lstsq(x1, y, rcond=None)
    else:
        warnings.warn(
            f"n={n} <= p={p}: falling back to ridge (lambda={ridge_fallback:g})",
            stacklevel=2,
        )
        a = x1.T @ x1 + ridge_fallback * np.eye(p + 1)
        w = np.linalg.solve(a, x1.T @ y)
    return LinearModel(coef=w[1:].copy(), intercept=float(w[0]))
