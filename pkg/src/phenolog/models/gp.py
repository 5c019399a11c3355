"""Gaussian Process score regression with a score-carrying prior mean.

The prior over the regression function has mean equal to each subject's
previous score and covariance k(x, x') = exp(-||x - x'||^2 / (2 l)) over
the 18 weighted online-behavior coordinates, with ``l`` acting as a
squared length scale. Observations carry independent Gaussian noise of
standard deviation ``sigma``. Prediction draws ``n_traces`` functions
from the predictive posterior; the scored point prediction is their
per-row average.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from ..errors import FitError

_MAX_JITTER = 1e-4


@dataclass(frozen=True)
class GPConfig:
    length_scale: float | None = None  # None -> median heuristic at fit time
    noise_std: float = 1.0
    n_traces: int = 100
    jitter: float = 1e-8

    def __post_init__(self) -> None:
        if self.length_scale is not None and not self.length_scale > 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be nonnegative, got {self.noise_std}")
        if self.n_traces < 1:
            raise ValueError("n_traces must be positive")
        if self.jitter <= 0:
            raise ValueError("jitter must be positive")

    def to_json(self) -> dict:
        return {
            "length_scale": self.length_scale,
            "noise_std": self.noise_std,
            "n_traces": self.n_traces,
            "jitter": self.jitter,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GPConfig":
        return cls(
            length_scale=data.get("length_scale"),
            noise_std=float(data.get("noise_std", 1.0)),
            n_traces=int(data.get("n_traces", 100)),
            jitter=float(data.get("jitter", 1e-8)),
        )


@dataclass(frozen=True)
class GPPosterior:
    """Predictive summary at the test points."""

    mean: np.ndarray
    std: np.ndarray  # predictive for the observed score: includes noise_std
    traces: np.ndarray  # (n_traces, m) sampled functions
    length_scale: float

    @property
    def point_prediction(self) -> np.ndarray:
        return self.traces.mean(axis=0)


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    """exp(-||a - b||^2 / (2 l)); ``l`` is a squared length scale."""
    return np.exp(-squared_distances(a, b) / (2.0 * length_scale))


def median_heuristic(x: np.ndarray) -> float:
    """Median pairwise squared distance; 1.0 when degenerate."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n < 2:
        return 1.0
    d2 = squared_distances(x, x)
    off = d2[np.triu_indices(n, k=1)]
    med = float(np.median(off))
    return med if med > 0 else 1.0


def _chol_with_escalation(matrix: np.ndarray, jitter: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating jitter up to the hard cap."""
    j = jitter
    eye = np.eye(matrix.shape[0])
    while j <= _MAX_JITTER:
        try:
            return cholesky(matrix + j * eye, lower=True), j
        except LinAlgError:
            j *= 10.0
    raise FitError(
        f"covariance not positive definite even with jitter {_MAX_JITTER:g}"
    )


def resolve_length_scale(train_x: np.ndarray, config: GPConfig) -> float:
    if config.length_scale is not None:
        return config.length_scale
    return median_heuristic(train_x)


def gp_posterior_predict(
    train_x: np.ndarray,
    train_y1: np.ndarray,
    train_y2: np.ndarray,
    test_x: np.ndarray,
    test_y1: np.ndarray,
    config: GPConfig,
    seed: int | np.random.Generator,
) -> GPPosterior:
    """Condition the prior on training rounds and sample test traces.

    With no training rows the posterior is the prior: mean equals the
    test subjects' previous scores and the predictive spread is the unit
    kernel diagonal combined with the noise level.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    test_x = np.atleast_2d(np.asarray(test_x, dtype=float))
    train_y1 = np.asarray(train_y1, dtype=float).ravel()
    train_y2 = np.asarray(train_y2, dtype=float).ravel()
    test_y1 = np.asarray(test_y1, dtype=float).ravel()
    n = 0 if train_x.size == 0 else train_x.shape[0]
    m = test_x.shape[0]
    if n and train_x.shape[0] != train_y1.size:
        raise ValueError("training rows and scores must align")
    if m != test_y1.size:
        raise ValueError("test rows and prior scores must align")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ell = resolve_length_scale(train_x if n else test_x, config)

    k_ss = kernel(test_x, test_x, ell)
    if n == 0:
        mean = test_y1.copy()
        cov = k_ss + config.jitter * np.eye(m)
    else:
        k_tt = kernel(train_x, train_x, ell)
        k_ts = kernel(train_x, test_x, ell)
        gram = k_tt + (config.noise_std**2) * np.eye(n)
        low, _ = _chol_with_escalation(gram, config.jitter)
        factor = (low, True)
        alpha = cho_solve(factor, train_y2 - train_y1)
        mean = test_y1 + k_ts.T @ alpha
        v = cho_solve(factor, k_ts)
        cov = k_ss - k_ts.T @ v + config.jitter * np.eye(m)

    low_s, _ = _chol_with_escalation(cov, config.jitter)
    draws = rng.standard_normal((m, config.n_traces))
    traces = (mean[:, None] + low_s @ draws).T

    variances = np.clip(np.diag(cov), 0.0, None)
    std = np.sqrt(variances + config.noise_std**2)
    return GPPosterior(mean=mean, std=std, traces=traces, length_scale=ell)


def log_marginal_likelihood(
    train_x: np.ndarray,
    train_y1: np.ndarray,
    train_y2: np.ndarray,
    length_scale: float,
    noise_std: float,
    jitter: float = 1e-8,
) -> float:
    """Evidence of the observed score changes under the prior."""
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    resid = np.asarray(train_y2, dtype=float) - np.asarray(train_y1, dtype=float)
    n = train_x.shape[0]
    gram = kernel(train_x, train_x, length_scale) + (noise_std**2) * np.eye(n)
    low, _ = _chol_with_escalation(gram, jitter)
    alpha = cho_solve((low, True), resid)
    return float(
        -0.5 * resid @ alpha - np.log(np.diag(low)).sum() - 0.5 * n * np.log(2.0 * np.pi)
    )


def select_gp_config(
    train_x: np.ndarray,
    train_y1: np.ndarray,
    train_y2: np.ndarray,
    config: GPConfig,
) -> GPConfig:
    """Optional grid search around the median heuristic, by evidence."""
    base = resolve_length_scale(np.atleast_2d(train_x), config)
    best: tuple[float, GPConfig] | None = None
    for scale in (0.25, 0.5, 1.0, 2.0, 4.0):
        for noise in (0.5, 1.0, 2.0):
            candidate = replace(config, length_scale=base * scale, noise_std=noise)
            lml = log_marginal_likelihood(
                train_x, train_y1, train_y2, candidate.length_scale, noise, config.jitter
            )
            if best is None or lml > best[0]:
                best = (lml, candidate)
    assert best is not None
    return best[1]
