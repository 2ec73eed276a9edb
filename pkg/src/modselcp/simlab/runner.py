"""Monte-Carlo experiments: coverage and width of each method over repeated trials.

Models are pretrained once per experiment. Every trial then draws a fresh
calibration sample of size ``n`` plus one test point, runs each method and
records whether the test response was covered and how large the set was.

Randomness is derived from ``master_seed`` with :class:`numpy.random.SeedSequence`
spawn keys (``(0,)`` for pretraining, ``(1, t)`` for trial ``t``), so results
do not depend on how trials are distributed across worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..calib import CalibrationScores
from ..lossfn import LossContext
from ..scores import RESIDUAL, DENSITY, RESCALED
from ..select import METHODS, TieBreaker, run_method
from . import dgp as dgps
from .invariants import check_trial_invariants
from .pretrain import (
    pretrain_classifiers,
    pretrain_ridge_subset_models,
    pretrain_sigma_estimators,
    two_model_class,
)

DEFAULT_METHODS = METHODS


class InvariantViolation(RuntimeError):
    """A structural property of the methods failed on some trial."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment.

    ``score`` is ``"residual"`` or ``"rescaled"`` for regression data; the
    two-model and classification designs fix it to ``"residual"`` and
    ``"density"`` respectively.
    """

    dgp: dgps.RegressionLinear | dgps.Classification | dgps.TwoModel
    n: int = 100
    n_models: int = 50
    alpha: float = 0.1
    trials: int = 1000
    master_seed: int = 0
    methods: tuple[str, ...] = DEFAULT_METHODS
    n_train: int = 300
    score: str = "residual"
    n1: int | None = None
    tie_break: str = "min_index"
    ridge_penalty: float = 0.1
    subset_frac: float = 0.1
    knn_k: int = 20
    check_invariants: bool = False
    invariant_grid: int = 300
    invariant_samples: int = 3
    setting: str = ""

    def __post_init__(self):
        if self.trials < 1 or self.n < 1 or self.n_train < 1:
            raise ValueError("trials, n and n_train must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {', '.join(unknown)}")
        if isinstance(self.dgp, dgps.TwoModel):
            object.__setattr__(self, "n_models", 2)
            object.__setattr__(self, "score", RESIDUAL)
        elif isinstance(self.dgp, dgps.Classification):
            object.__setattr__(self, "score", DENSITY)
        elif self.score not in (RESIDUAL, RESCALED):
            raise ValueError("regression data supports the 'residual' and 'rescaled' scores")
        if self.n_models < 1:
            raise ValueError("n_models must be positive")
        TieBreaker.parse(self.tie_break)
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class MethodSummary:
    method: str
    coverage: float
    coverage_se: float
    width: float
    width_se: float
    width_ratio: float
    width_ratio_se: float


@dataclass(frozen=True)
class TrialRecord:
    covered: dict
    widths: dict
    single_widths: np.ndarray
    checks: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSummary:
    config: ExperimentConfig
    rows: tuple[MethodSummary, ...]
    best_single_width: float
    best_single_model: int
    checks: dict = field(default_factory=dict)
    records: tuple[TrialRecord, ...] | None = None

    def row(self, method: str) -> MethodSummary:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


# ---------------------------------------------------------------------------
# seeds and pretraining
# ---------------------------------------------------------------------------


def _rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master, spawn_key=key))


def pretrain(cfg: ExperimentConfig):
    """Returns (trained models, extra data-generation state)."""
    spec = cfg.dgp
    if isinstance(spec, dgps.TwoModel):
        return two_model_class(spec.C), None
    if isinstance(spec, dgps.Classification):
        beta = spec.draw_beta(_rng(cfg.master_seed, 2))
        X, y = dgps.gen_classification_data(spec, cfg.n_train, _rng(cfg.master_seed, 0, 0), beta)
        models = pretrain_classifiers(X, y, cfg.n_models, spec.n_labels, seed=_rng(cfg.master_seed, 0, 1))
        return models, beta
    X, y = dgps.gen_regression_data(spec, cfg.n_train, _rng(cfg.master_seed, 0, 0))
    model_rng = _rng(cfg.master_seed, 0, 1)
    if cfg.score == RESIDUAL:
        return pretrain_ridge_subset_models(X, y, cfg.n_models, cfg.subset_frac, cfg.ridge_penalty, model_rng), None
    half = cfg.n_train // 2
    base = pretrain_ridge_subset_models(X[:half], y[:half], cfg.n_models, cfg.subset_frac, cfg.ridge_penalty, model_rng)
    return pretrain_sigma_estimators(X[half:], y[half:], base, cfg.knn_k), None


def draw_trial_data(cfg: ExperimentConfig, state, t: int):
    """n calibration points plus one test point for trial t."""
    rng = _rng(cfg.master_seed, 1, t)
    m = cfg.n + 1
    spec = cfg.dgp
    if isinstance(spec, dgps.TwoModel):
        X, y = dgps.gen_two_model_data(spec, m, rng)
    elif isinstance(spec, dgps.Classification):
        X, y = dgps.gen_classification_data(spec, m, rng, state)
    else:
        X, y = dgps.gen_regression_data(spec, m, rng)
    return X[:-1], y[:-1], X[-1], y[-1]


# ---------------------------------------------------------------------------
# one trial
# ---------------------------------------------------------------------------


def run_trial(cfg: ExperimentConfig, models, state, t: int) -> TrialRecord:
    X_cal, y_cal, x_test, y_test = draw_trial_data(cfg, state, t)
    mc = models.model_class(X_cal, x_test)
    ctx = LossContext(mc)
    cs = CalibrationScores(mc.calib_scores(y_cal), cfg.alpha)
    tb = TieBreaker.parse(cfg.tie_break)

    covered, widths, outputs = {}, {}, {}
    for name in cfg.methods:
        out = run_method(name, ctx, cs, tb, n1=cfg.n1)
        outputs[name] = out
        covered[name] = bool(out.region.contains(y_test))
        widths[name] = out.region.measure()
    q = cs.q_hat()
    single = np.array([mc.region(l, q[l]).measure() for l in range(mc.size)])
    checks = {}
    if cfg.check_invariants:
        checks = check_trial_invariants(ctx, cs, tb, y_cal, outputs, cfg, _rng(cfg.master_seed, 3, t))
        failed = [k for k, v in checks.items() if v is False]
        if failed:
            raise InvariantViolation(f"trial {t}: invariant(s) failed: {', '.join(failed)}")
    return TrialRecord(covered, widths, single, checks)


def _run_chunk(args):
    cfg, models, state, ts = args
    return [run_trial(cfg, models, state, t) for t in ts]


def worker_count(default: int = 1) -> int:
    raw = os.environ.get("MODSEL_THREADS", "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def _mean_se(values) -> tuple[float, float]:
    """Mean and standard error (sd / sqrt(count)); SE is NaN for one value."""
    vals = [float(v) for v in values]
    t = len(vals)
    if any(math.isinf(v) for v in vals):
        return math.inf, (math.nan if t == 1 else math.inf)
    mean = math.fsum(vals) / t
    if t == 1:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in vals) / (t - 1)
    return mean, math.sqrt(var / t)


def summarize(cfg: ExperimentConfig, records: list[TrialRecord], keep_records: bool = False) -> ExperimentSummary:
    single = np.array([r.single_widths for r in records])  # (trials, models)
    single_means = [math.fsum(single[:, l]) / len(records) for l in range(single.shape[1])]
    best = int(np.argmin(single_means))
    denom = single_means[best]
    rows = []
    for name in cfg.methods:
        cov, cov_se = _mean_se(r.covered[name] for r in records)
        wid, wid_se = _mean_se(r.widths[name] for r in records)
        rows.append(MethodSummary(name, cov, cov_se, wid, wid_se, wid / denom, wid_se / denom))
    checks = {}
    for r in records:
        for k, v in r.checks.items():
            if v is None:
                continue
            checks.setdefault(k, [0, 0])
            checks[k][0] += 1
            checks[k][1] += int(bool(v))
    return ExperimentSummary(
        cfg,
        tuple(rows),
        denom,
        best,
        {k: tuple(v) for k, v in checks.items()},
        tuple(records) if keep_records else None,
    )


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, keep_records: bool = False) -> ExperimentSummary:
    """Run all trials and aggregate per-method coverage and width statistics.

    ``workers`` defaults to the ``MODSEL_THREADS`` environment variable (or 1).
    The result is identical for any worker count.
    """
    models, state = pretrain(cfg)
    workers = worker_count() if workers is None else max(1, int(workers))
    trials = list(range(cfg.trials))
    if workers == 1 or cfg.trials < 2:
        records = _run_chunk((cfg, models, state, trials))
    else:
        size = max(1, math.ceil(cfg.trials / (4 * workers)))
        chunks = [(cfg, models, state, trials[i : i + size]) for i in range(0, cfg.trials, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [rec for part in pool.map(_run_chunk, chunks) for rec in part]
    return summarize(cfg, records, keep_records)
