"""Trained-model artifacts: training entry points plus versioned JSON.

Classification trainers take the raw 16-feature matrix (NaN allowed for
missing inactivity modes) and learn their own impute+standardize state.
Regression trainers take the already-assembled 19-column input; the
caller owns the 9-feature preprocessing so the eta weighting is applied
to standardized coordinates. Every artifact records the feature-name
fingerprint it was trained on and refuses to predict against a
mismatched table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import FitError
from .gp import GPConfig, GPPosterior, gp_posterior_predict, resolve_length_scale
from .linear import LinearModel, LogisticModel, fit_logistic, fit_ols
from .preprocess import TablePreprocessor
from .trees import (
    BoostingConfig,
    ForestConfig,
    GradientBoostingRegressor,
    RandomForestClassifier,
)

ARTIFACT_VERSION = 1
MIN_TRAIN_ROWS = 10

CLASSIFIER_KINDS = ("lr", "rf")
REGRESSOR_KINDS = ("ols", "gb", "gp")


@dataclass
class ModelArtifact:
    kind: str
    feature_names: tuple[str, ...]
    seed: int
    params: dict
    preprocess: dict | None = None
    extra: dict = field(default_factory=dict)

    def check_features(self, names: Sequence[str]) -> None:
        if tuple(names) != tuple(self.feature_names):
            raise FitError("feature order mismatch")

    def to_json(self) -> dict:
        return {
            "version": ARTIFACT_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "seed": self.seed,
            "preprocess": self.preprocess,
            "params": self.params,
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModelArtifact":
        version = data.get("version")
        if version != ARTIFACT_VERSION:
            raise FitError(f"unsupported artifact version {version!r}")
        return cls(
            kind=data["kind"],
            feature_names=tuple(data["feature_names"]),
            seed=int(data["seed"]),
            params=data["params"],
            preprocess=data.get("preprocess"),
            extra=data.get("extra", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ModelArtifact":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_classification_inputs(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[0] != y.size:
        raise ValueError("rows and labels must align")
    if x.shape[0] < MIN_TRAIN_ROWS:
        raise FitError(f"need at least {MIN_TRAIN_ROWS} rows, got {x.shape[0]}")
    if np.unique(y).size < 2:
        raise FitError("training labels contain a single class")


def train_logistic(
    x: np.ndarray,
    y: np.ndarray,
    l2: float = 0.01,
    seed: int = 0,
    feature_names: Sequence[str] = (),
) -> ModelArtifact:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    _check_classification_inputs(x, y)
    prep = TablePreprocessor.fit(x)
    model = fit_logistic(prep.transform(x), y.astype(float), l2=l2)
    return ModelArtifact(
        kind="lr",
        feature_names=tuple(feature_names) or tuple(f"f{i}" for i in range(x.shape[1])),
        seed=seed,
        preprocess=prep.to_json(),
        params={
            "coef": model.coef.tolist(),
            "intercept": model.intercept,
            "l2": l2,
            "converged": model.converged,
            "iterations": model.iterations,
        },
    )


def train_random_forest(
    x: np.ndarray,
    y: np.ndarray,
    config: ForestConfig = ForestConfig(),
    seed: int = 0,
    feature_names: Sequence[str] = (),
) -> ModelArtifact:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    _check_classification_inputs(x, y)
    prep = TablePreprocessor.fit(x)
    forest = RandomForestClassifier(config=config, seed=seed).fit(prep.transform(x), y)
    return ModelArtifact(
        kind="rf",
        feature_names=tuple(feature_names) or tuple(f"f{i}" for i in range(x.shape[1])),
        seed=seed,
        preprocess=prep.to_json(),
        params={"config": config.to_json(), "trees": forest.trees},
    )


def train_ols(
    x: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str] = (),
    seed: int = 0,
) -> ModelArtifact:
    x = np.asarray(x, dtype=float)
    model = fit_ols(x, np.asarray(y, dtype=float))
    return ModelArtifact(
        kind="ols",
        feature_names=tuple(feature_names) or tuple(f"f{i}" for i in range(x.shape[1])),
        seed=seed,
        params={"coef": model.coef.tolist(), "intercept": model.intercept},
    )


def train_gradient_boosting(
    x: np.ndarray,
    y: np.ndarray,
    config: BoostingConfig = BoostingConfig(),
    seed: int = 0,
    feature_names: Sequence[str] = (),
) -> ModelArtifact:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] < MIN_TRAIN_ROWS:
        raise FitError(f"need at least {MIN_TRAIN_ROWS} rows, got {x.shape[0]}")
    booster = GradientBoostingRegressor(config=config, seed=seed).fit(x, y)
    return ModelArtifact(
        kind="gb",
        feature_names=tuple(feature_names) or tuple(f"f{i}" for i in range(x.shape[1])),
        seed=seed,
        params={
            "config": config.to_json(),
            "base_prediction": booster.base_prediction,
            "trees": booster.trees,
        },
    )


def train_gp(
    x: np.ndarray,
    y1: np.ndarray,
    y2: np.ndarray,
    config: GPConfig = GPConfig(),
    seed: int = 0,
    feature_names: Sequence[str] = (),
) -> ModelArtifact:
    """Cache the training rounds; GP "training" is conditioning."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ell = resolve_length_scale(x, config)
    stored = GPConfig(
        length_scale=ell,
        noise_std=config.noise_std,
        n_traces=config.n_traces,
        jitter=config.jitter,
    )
    return ModelArtifact(
        kind="gp",
        feature_names=tuple(feature_names) or tuple(f"f{i}" for i in range(x.shape[1])),
        seed=seed,
        params={
            "config": stored.to_json(),
            "train_x": x.tolist(),
            "train_y1": np.asarray(y1, dtype=float).tolist(),
            "train_y2": np.asarray(y2, dtype=float).tolist(),
        },
    )


def _forest_from_artifact(artifact: ModelArtifact) -> RandomForestClassifier:
    cfg = artifact.params["config"]
    forest = RandomForestClassifier(
        config=ForestConfig(
            n_trees=cfg["n_trees"],
            max_depth=cfg["max_depth"],
            min_leaf=cfg["min_leaf"],
            mtry=cfg["mtry"],
            bootstrap=cfg["bootstrap"],
        ),
        seed=artifact.seed,
    )
    forest.trees = artifact.params["trees"]
    return forest


def _booster_from_artifact(artifact: ModelArtifact) -> GradientBoostingRegressor:
    cfg = artifact.params["config"]
    booster = GradientBoostingRegressor(
        config=BoostingConfig(
            n_estimators=cfg["n_estimators"],
            learning_rate=cfg["learning_rate"],
            max_depth=cfg["max_depth"],
            min_leaf=cfg["min_leaf"],
            subsample=cfg["subsample"],
        ),
        seed=artifact.seed,
    )
    booster.base_prediction = artifact.params["base_prediction"]
    booster.trees = artifact.params["trees"]
    return booster


def predict_proba(artifact: ModelArtifact, x: np.ndarray) -> np.ndarray:
    """Class-1 (anxious) probability from a classification artifact."""
    x = np.asarray(x, dtype=float)
    if artifact.preprocess is not None:
        x = TablePreprocessor.from_json(artifact.preprocess).transform(x)
    if artifact.kind == "lr":
        model = LogisticModel(
            coef=np.array(artifact.params["coef"], dtype=float),
            intercept=float(artifact.params["intercept"]),
            converged=bool(artifact.params.get("converged", True)),
            iterations=int(artifact.params.get("iterations", 0)),
        )
        return model.predict_proba(x)
    if artifact.kind == "rf":
        return _forest_from_artifact(artifact).predict_proba(x)
    raise FitError(f"artifact kind {artifact.kind!r} is not a classifier")


def predict_regression(artifact: ModelArtifact, x: np.ndarray) -> np.ndarray:
    """Point estimate from an OLS or boosting artifact."""
    x = np.asarray(x, dtype=float)
    if artifact.kind == "ols":
        model = LinearModel(
            coef=np.array(artifact.params["coef"], dtype=float),
            intercept=float(artifact.params["intercept"]),
        )
        return model.predict(x)
    if artifact.kind == "gb":
        return _booster_from_artifact(artifact).predict(x)
    raise FitError(f"artifact kind {artifact.kind!r} is not a point regressor")


def predict_gp(
    artifact: ModelArtifact,
    x_gp: np.ndarray,
    y1: np.ndarray,
    seed: int | None = None,
) -> GPPosterior:
    if artifact.kind != "gp":
        raise FitError(f"artifact kind {artifact.kind!r} is not a GP")
    params = artifact.params
    return gp_posterior_predict(
        np.array(params["train_x"], dtype=float),
        np.array(params["train_y1"], dtype=float),
        np.array(params["train_y2"], dtype=float),
        np.asarray(x_gp, dtype=float),
        np.asarray(y1, dtype=float),
        GPConfig.from_json(params["config"]),
        artifact.seed if seed is None else seed,
    )
