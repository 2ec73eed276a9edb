"""Conformal prediction sets with data-dependent model selection."""

from .calib import CalibrationScores, empirical_quantile
from .lossfn import LossContext
from .pwl import PiecewiseLinearFn
from .regions import PredictionRegion, region_diff_measure
from .scores import (
    CondDensity,
    Cqr,
    ModelClass,
    RescaledResidual,
    Residual,
    region_at_threshold,
    score_calib,
    score_profile_test,
    set_size,
)
from .select import (
    METHODS,
    CompetingSets,
    MethodOutput,
    TieBreaker,
    adjusted_alpha,
    competing_sets,
    modsel_cp,
    modsel_cp_loo,
    run_method,
    split_conformal,
    yk_adjust,
    yk_baseline,
    yk_split,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationScores",
    "CompetingSets",
    "CondDensity",
    "Cqr",
    "LossContext",
    "METHODS",
    "MethodOutput",
    "ModelClass",
    "PiecewiseLinearFn",
    "PredictionRegion",
    "RescaledResidual",
    "Residual",
    "TieBreaker",
    "adjusted_alpha",
    "competing_sets",
    "empirical_quantile",
    "modsel_cp",
    "modsel_cp_loo",
    "region_at_threshold",
    "region_diff_measure",
    "run_method",
    "score_calib",
    "score_profile_test",
    "set_size",
    "split_conformal",
    "yk_adjust",
    "yk_baseline",
    "yk_split",
]
