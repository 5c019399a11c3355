"""Model suite: two classifiers, three regressors, shared preprocessing."""

from .artifact import (
    ModelArtifact,
    predict_gp,
    predict_proba,
    predict_regression,
    train_gp,
    train_gradient_boosting,
    train_logistic,
    train_ols,
    train_random_forest,
)
from .gp import GPConfig, GPPosterior, gp_posterior_predict, select_gp_config
from .preprocess import (
    ANXIETY_CUTOFF,
    DEFAULT_ETA,
    AnxietyLabel,
    RegressionInput,
    StandardizerState,
    TablePreprocessor,
    assemble_regression_matrix,
    build_regression_input,
    label_anxiety,
)
from .trees import BoostingConfig, ForestConfig

__all__ = [
    "ANXIETY_CUTOFF",
    "DEFAULT_ETA",
    "AnxietyLabel",
    "BoostingConfig",
    "ForestConfig",
    "GPConfig",
    "GPPosterior",
    "ModelArtifact",
    "RegressionInput",
    "StandardizerState",
    "TablePreprocessor",
    "assemble_regression_matrix",
    "build_regression_input",
    "gp_posterior_predict",
    "label_anxiety",
    "predict_gp",
    "predict_proba",
    "predict_regression",
    "select_gp_config",
    "train_gp",
    "train_gradient_boosting",
    "train_logistic",
    "train_ols",
    "train_random_forest",
]
