"""Random small problem instances shared by the oracle and acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from modselcp.calib import CalibrationScores
from modselcp.lossfn import LossContext
from modselcp.regions import PredictionRegion
from modselcp.scores import ModelClass
from modselcp.select import TieBreaker


@dataclass
class Instance:
    mc: ModelClass
    y_cal: np.ndarray
    alpha: float
    tb: TieBreaker

    @property
    def ctx(self) -> LossContext:
        return LossContext(self.mc)

    @property
    def cs(self) -> CalibrationScores:
        return CalibrationScores(self.mc.calib_scores(self.y_cal), self.alpha)


def continuous_instance(rng: np.random.Generator, family: str, max_n: int = 30, max_models: int = 6) -> Instance:
    """Linear-ish predictors of a noisy linear response; n <= max_n, |models| <= max_models."""
    L = int(rng.integers(1, max_models + 1))
    n = int(rng.integers(1, max_n + 1))
    alpha = float(rng.uniform(0.05, 0.5))
    x = rng.normal(size=n + 1)
    y = x[:-1] + rng.normal(size=n)
    f = x[None, :] * rng.uniform(0.5, 1.5, (L, 1)) + rng.normal(0, 1, (L, 1))
    if rng.random() < 0.2 and L > 1:
        f[1] = f[0]  # a duplicated model exercises tie-breaking
    if family == "residual":
        mc = ModelClass.residual(f[:, :-1], f[:, -1])
    elif family == "rescaled":
        s = rng.uniform(0.5, 2, (L, n + 1))
        mc = ModelClass.rescaled(f[:, :-1], f[:, -1], s[:, :-1], s[:, -1])
    elif family == "cqr":
        g = rng.uniform(0.1, 3, (L, n + 1))
        mc = ModelClass.cqr(f[:, :-1] - g[:, :-1] / 2, f[:, :-1] + g[:, :-1] / 2, f[:, -1] - g[:, -1] / 2, f[:, -1] + g[:, -1] / 2)
    else:
        raise ValueError(family)
    return Instance(mc, y, alpha, TieBreaker())


def discrete_instance(rng: np.random.Generator, max_n: int = 30, max_models: int = 6, max_labels: int = 8) -> Instance:
    """Random class-probability models; probabilities are coarse so that ties occur."""
    L = int(rng.integers(1, max_models + 1))
    n = int(rng.integers(1, max_n + 1))
    K = int(rng.integers(2, max_labels + 1))
    alpha = float(rng.uniform(0.05, 0.5))
    counts = rng.integers(0, 4, size=(L, n + 1, K)).astype(float)
    counts[..., 0] += 1.0  # never all zero
    p = counts / counts.sum(axis=2, keepdims=True)
    if rng.random() < 0.3 and L > 1:
        p[1] = p[0]
    y = rng.integers(0, K, size=n)
    tb = TieBreaker() if rng.random() < 0.5 else TieBreaker.seeded(int(rng.integers(0, 2**63)))
    return Instance(ModelClass.density(p[:, :n], p[:, n]), y, alpha, tb)


def clip_to(region: PredictionRegion, lo: float, hi: float) -> PredictionRegion:
    """Restrict a real-line region to a grid's span (the oracle only sees the grid)."""
    if region.is_empty:
        return region
    return region.clip(lo, hi)
