"""Toolkit for predicting a future physical performance score.

Thin Python surface over the C++ core: assessment scoring, synthetic cohort
generation, k-nearest-neighbor imputation with 0-1 scaling, four regressor
families trained from scratch, exact tree attributions, and error metrics.
The command line tool drives the full pipeline; this package exposes the
building blocks for interactive use.
"""

from ._core import (
    UNLIMITED_DEPTH,
    Attributions,
    ConfigError,
    DataError,
    FitError,
    PreprocessModel,
    Regressor,
    RegressorSpec,
    __version__,
    apply_preprocess,
    classify_sppb,
    default_shap_exclusions,
    fit_preprocess,
    fit_regressor,
    linear_attributions,
    load_preprocess,
    load_regressor,
    mae,
    mse,
    rank_features,
    score_balance,
    score_chair,
    score_gait,
    synthetic_dataset,
    total_sppb,
    tree_shap,
)

__all__ = [
    "UNLIMITED_DEPTH",
    "Attributions",
    "ConfigError",
    "DataError",
    "FitError",
    "PreprocessModel",
    "Regressor",
    "RegressorSpec",
    "__version__",
    "apply_preprocess",
    "classify_sppb",
    "default_shap_exclusions",
    "fit_preprocess",
    "fit_regressor",
    "linear_attributions",
    "load_preprocess",
    "load_regressor",
    "mae",
    "mse",
    "rank_features",
    "score_balance",
    "score_chair",
    "score_gait",
    "synthetic_dataset",
    "total_sppb",
    "tree_shap",
]
