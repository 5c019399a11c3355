"""Fold-local preprocessing, labeling, and regression-input assembly.

Preprocessing state is always learned on training rows only and carried
inside the trained artifact, so applying a saved model to new rows can
never leak test-fold statistics.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

ANXIETY_CUTOFF = 9
DEFAULT_ETA = 0.9


class AnxietyLabel(enum.Enum):
    NOT_ANXIOUS = 0
    ANXIOUS = 1

    def __str__(self) -> str:
        return "Anxious" if self is AnxietyLabel.ANXIOUS else "NotAnxious"


def label_anxiety(score: int) -> AnxietyLabel:
    """Binary label from a GAD-7 score: strictly above 9 is anxious."""
    if not 0 <= score <= 21:
        raise ValueError(f"GAD-7 score out of range: {score}")
    return AnxietyLabel.ANXIOUS if score > ANXIETY_CUTOFF else AnxietyLabel.NOT_ANXIOUS


@dataclass(frozen=True)
class StandardizerState:
    """Per-dimension location/scale learned on training data."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "StandardizerState":
        x = np.asarray(x, dtype=float)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        flat = std <= 0
        if flat.any():
            warnings.warn(
                f"{int(flat.sum())} feature dimension(s) have zero variance; scale forced to 1",
                stacklevel=2,
            )
            std = np.where(flat, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std


@dataclass(frozen=True)
class TablePreprocessor:
    """Median-impute missing entries, then z-score each dimension."""

    medians: np.ndarray
    standardizer: StandardizerState

    @classmethod
    def fit(cls, x: np.ndarray) -> "TablePreprocessor":
        x = np.asarray(x, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            medians = np.nanmedian(x, axis=0)
        medians = np.where(np.isnan(medians), 0.0, medians)
        filled = np.where(np.isnan(x), medians, x)
        return cls(medians=medians, standardizer=StandardizerState.fit(filled))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        filled = np.where(np.isnan(x), self.medians, x)
        return self.standardizer.transform(filled)

    def to_json(self) -> dict:
        return {
            "medians": self.medians.tolist(),
            "mean": self.standardizer.mean.tolist(),
            "std": self.standardizer.std.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TablePreprocessor":
        return cls(
            medians=np.array(data["medians"], dtype=float),
            standardizer=StandardizerState(
                mean=np.array(data["mean"], dtype=float),
                std=np.array(data["std"], dtype=float),
            ),
        )


@dataclass(frozen=True)
class RegressionInput:
    """Weighted concatenation of the follow-up features, the between-round
    shift, and the prior score.

    ``assembled`` is [eta * x2, (1 - eta) * (x1 - x2), y1]; the first 18
    entries are the kernel-space coordinates used by the GP.
    """

    x2: np.ndarray
    delta_x: np.ndarray
    y1: float
    eta: float
    assembled: np.ndarray

    @property
    def x_gp(self) -> np.ndarray:
        return self.assembled[:-1]


def build_regression_input(
    x1: np.ndarray,
    x2: np.ndarray,
    y1: float,
    eta: float = DEFAULT_ETA,
) -> RegressionInput:
    """Assemble one prediction-task row from two rounds of features."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError(f"feature vectors must share one shape, got {x1.shape} vs {x2.shape}")
    if not (np.isfinite(x1).all() and np.isfinite(x2).all() and np.isfinite(y1)):
        raise ValueError("regression inputs must be finite (impute before assembling)")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta out of [0,1]: {eta}")
    delta = x1 - x2
    assembled = np.concatenate([eta * x2, (1.0 - eta) * delta, [float(y1)]])
    return RegressionInput(x2=x2, delta_x=delta, y1=float(y1), eta=eta, assembled=assembled)


def assemble_regression_matrix(
    x1_rows: np.ndarray,
    x2_rows: np.ndarray,
    y1_values: np.ndarray,
    eta: float = DEFAULT_ETA,
) -> np.ndarray:
    """Stack :func:`build_regression_input` over aligned row matrices."""
    rows = [
        build_regression_input(x1, x2, y1, eta).assembled
        for x1, x2, y1 in zip(x1_rows, x2_rows, y1_values)
    ]
    return np.array(rows) if rows else np.empty((0, 2 * x1_rows.shape[1] + 1))
