"""Synthetic experiments: data-generating processes, pretraining and the trial runner."""

from .dgp import (
    Classification,
    RegressionLinear,
    TwoModel,
    gen_classification_data,
    gen_regression_data,
    gen_two_model_data,
)
from .pretrain import (
    pretrain_classifiers,
    pretrain_ridge_subset_models,
    pretrain_sigma_estimators,
    two_model_class,
)
from .runner import (
    ExperimentConfig,
    ExperimentSummary,
    InvariantViolation,
    MethodSummary,
    run_experiment,
)

__all__ = [
    "Classification",
    "ExperimentConfig",
    "ExperimentSummary",
    "InvariantViolation",
    "MethodSummary",
    "RegressionLinear",
    "TwoModel",
    "gen_classification_data",
    "gen_regression_data",
    "gen_two_model_data",
    "pretrain_classifiers",
    "pretrain_ridge_subset_models",
    "pretrain_sigma_estimators",
    "run_experiment",
    "two_model_class",
]
