"""Brute-force reference implementations used to check the fast methods.

Everything here re-derives quantiles by explicitly forming the augmented or
leave-one-out multisets and taking order statistics, and recomputes the loss
directly as the mean of per-point set sizes. Nothing is shared with the
closed forms in :mod:`calib`, :mod:`lossfn` or :mod:`select` except the model
data itself and the tie-breaking draw ``xi`` of a :class:`TieBreaker`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calib import CalibrationScores, quantile_rank
from .lossfn import LossContext
from .regions import PredictionRegion, region_diff_measure
from .scores import CQR, DENSITY, RESCALED, RESIDUAL, ModelClass
from .select import TieBreaker

__all__ = [
    "GridSpec",
    "direct_loss",
    "kth_smallest",
    "grid_modsel_cp",
    "grid_modsel_cp_loo",
    "exact_modsel_cp_membership",
    "exact_loo_membership",
    "loo_selected_models",
    "enum_modsel_cp",
    "enum_modsel_cp_loo",
    "default_grid",
    "region_diff_measure",
]


@dataclass(frozen=True)
class GridSpec:
    """Evenly spaced grid ``lo, lo + step, ..., hi`` with ``n_points`` points."""

    lo: float
    hi: float
    n_points: int = 100_001

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError("grid needs finite lo < hi")
        if self.n_points < 2:
            raise ValueError("grid needs at least two points")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n_points - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)


def kth_smallest(values: np.ndarray, k: int, axis: int = -1) -> np.ndarray:
    """k-th smallest along ``axis`` via partial sorting (+-inf outside 1..m)."""
    m = values.shape[axis]
    if k <= 0 or k > m:
        shape = list(values.shape)
        del shape[axis]
        return np.full(shape, -math.inf if k <= 0 else math.inf)
    return np.take(np.partition(values, k - 1, axis=axis), k - 1, axis=axis)


def _argmin_rows(values: np.ndarray, xi: float) -> np.ndarray:
    """Row-wise argmin; among tied minima take the ``floor(xi * count)``-th smallest index."""
    order = np.argsort(values, axis=1, kind="stable")
    ranked = np.take_along_axis(values, order, axis=1)
    count = (ranked == ranked[:, :1]).sum(axis=1)
    pos = np.floor(xi * count).astype(int)
    return order[np.arange(values.shape[0]), pos]


def _sizes(mc: ModelClass, lam: int, q: np.ndarray, include_test: bool = True) -> np.ndarray:
    """Per-point set sizes of model lam at thresholds q: shape q.shape + (points,)."""
    q = np.asarray(q, dtype=float)[..., None]
    if mc.family == RESIDUAL:
        m = mc.n + int(include_test)
        return np.broadcast_to(np.maximum(0.0, 2.0 * q), q.shape[:-1] + (m,))
    if mc.family == RESCALED:
        sig = np.append(mc.sigma_calib[lam], mc.sigma_test[lam]) if include_test else mc.sigma_calib[lam]
        return np.maximum(0.0, 2.0 * q) * sig
    if mc.family == CQR:
        gap = mc.qhi_calib[lam] - mc.qlo_calib[lam]
        if include_test:
            gap = np.append(gap, mc.qhi_test[lam] - mc.qlo_test[lam])
        return np.maximum(0.0, gap + 2.0 * q)
    p = mc.p_calib[lam]
    if include_test:
        p = np.vstack([p, mc.p_test[lam][None, :]])
    return (p[None, :, :] >= -q.reshape(-1, 1, 1)).sum(axis=2).reshape(q.shape[:-1] + (p.shape[0],)).astype(float)


def direct_loss(mc: ModelClass, lam: int, q) -> np.ndarray:
    """Mean set size over all calibration points and the test point."""
    q = np.asarray(q, dtype=float)
    with np.errstate(invalid="ignore"):
        out = _sizes(mc, lam, q).mean(axis=-1)
    if mc.family != DENSITY:
        out = np.where(q == math.inf, math.inf, out)
    else:
        out = np.where(q == math.inf, float(mc.n_labels), out)
    return out


def _all_losses(mc: ModelClass, q_by_model: np.ndarray) -> np.ndarray:
    return np.stack([direct_loss(mc, l, q_by_model[l]) for l in range(mc.size)])


def _augmented_quantiles(calib: np.ndarray, test: np.ndarray, alpha: float) -> np.ndarray:
    """Level 1-alpha quantile of {calib scores} + {one test score}, per test score.

    calib: (models, n); test: (models, G) -> (models, G)
    """
    n_models, n = calib.shape
    G = test.shape[1]
    k = quantile_rank(1.0 - alpha, n + 1)
    bag = np.concatenate([np.broadcast_to(calib[:, None, :], (n_models, G, n)), test[:, :, None]], axis=2)
    return kth_smallest(bag, k, axis=2)


def exact_modsel_cp_membership(mc: ModelClass, y_cal, alpha: float, tb: TieBreaker, ys) -> np.ndarray:
    """Whether each hypothesised response lies in the ModSel-CP set, by definition."""
    calib = mc.calib_scores(np.asarray(y_cal))
    s = mc.test_scores(ys)
    q_aug = _augmented_quantiles(calib, s, alpha)
    losses = _all_losses(mc, q_aug)  # (models, G)
    chosen = _argmin_rows(losses.T, tb.xi)
    cols = np.arange(s.shape[1])
    return s[chosen, cols] <= q_aug[chosen, cols]


def loo_selected_models(mc: ModelClass, y_cal, alpha: float, tb: TieBreaker, ys) -> np.ndarray:
    """Leave-i-out selected model at each hypothesised response: (G, n)."""
    calib = mc.calib_scores(np.asarray(y_cal))
    s = mc.test_scores(ys)  # (models, G)
    n_models, n = calib.shape
    G = s.shape[1]
    k = quantile_rank((1.0 - alpha) * (1.0 + 1.0 / n), n)
    keep = ~np.eye(n, dtype=bool)
    retained = np.stack([calib[:, keep[i]] for i in range(n)], axis=1)  # (models, n, n-1)
    bag = np.concatenate(
        [
            np.broadcast_to(retained[:, None, :, :], (n_models, G, n, n - 1)),
            np.broadcast_to(s[:, :, None, None], (n_models, G, n, 1)),
        ],
        axis=3,
    )
    q_loo = kth_smallest(bag, k, axis=3)  # (models, G, n)
    losses = _all_losses(mc, q_loo)
    flat = losses.transpose(1, 2, 0).reshape(G * n, n_models)
    return _argmin_rows(flat, tb.xi).reshape(G, n)


def exact_loo_membership(mc: ModelClass, y_cal, alpha: float, tb: TieBreaker, ys) -> np.ndarray:
    """Whether each hypothesised response lies in the ModSel-CP-LOO set, by definition."""
    y_cal = np.asarray(y_cal)
    calib = mc.calib_scores(y_cal)
    n_models, n = calib.shape
    k_sel = quantile_rank(1.0 - alpha, n + 1)
    q_hat = np.array([kth_smallest(calib[l], k_sel) for l in range(n_models)])
    lam_hat = int(_argmin_rows(_all_losses(mc, q_hat)[None, :], tb.xi)[0])
    s_hat = mc.test_scores(ys)[lam_hat]
    chosen = loo_selected_models(mc, y_cal, alpha, tb, ys)  # (G, n)
    cal_losses = _all_losses(mc, calib)  # (models, n)
    vals = cal_losses[chosen, np.arange(n)[None, :]]  # (G, n)
    k = quantile_rank((1.0 - alpha) * (1.0 + 1.0 / n), n)
    budget = kth_smallest(vals, k, axis=1)
    return direct_loss(mc, lam_hat, s_hat) <= budget


def _mask_to_region(ys: np.ndarray, mask: np.ndarray) -> PredictionRegion:
    """Accepted grid points -> intervals; each point stands for its half-step cell."""
    if not mask.any():
        return PredictionRegion.empty()
    half = 0.5 * (ys[1] - ys[0])
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    d = np.diff(padded)
    starts, ends = np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1
    pieces = [
        (max(ys[0], ys[a] - half), min(ys[-1], ys[b] + half)) for a, b in zip(starts, ends)
    ]
    return PredictionRegion.from_intervals(pieces, tol=0.0)


def _chunks(ys: np.ndarray, size: int):
    for start in range(0, ys.size, size):
        yield slice(start, start + size)


def default_grid(ctx: LossContext, cs: CalibrationScores, n_points: int = 100_001) -> GridSpec:
    """A grid that contains every finite interval either method can produce.

    Any threshold used by either method is at most the largest calibration
    loss; the grid covers every model's set at that loss, padded by 10%.
    """
    mc = ctx.model_class
    budget = float(ctx.loss_all(cs.scores).max())
    lo, hi = math.inf, -math.inf
    for lam in range(mc.size):
        for iv in mc.region(lam, ctx.invert_loss(lam, budget)).as_intervals():
            lo, hi = min(lo, iv[0]), max(hi, iv[1])
    centers = mc.centers()
    lo, hi = min(lo, centers.min()), max(hi, centers.max())
    pad = 0.1 * (hi - lo) + 1.0
    return GridSpec(lo - pad, hi + pad, n_points)


def grid_modsel_cp(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker, y_cal, grid: GridSpec | None = None, chunk: int = 2000) -> PredictionRegion:
    """ModSel-CP set on a grid by evaluating the definition at every grid point."""
    mc = ctx.model_class
    grid = default_grid(ctx, cs) if grid is None else grid
    ys = grid.points()
    mask = np.concatenate(
        [exact_modsel_cp_membership(mc, y_cal, cs.alpha, tb, ys[sl]) for sl in _chunks(ys, chunk)]
    )
    return _mask_to_region(ys, mask)


def grid_modsel_cp_loo(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker, y_cal, grid: GridSpec | None = None, chunk: int = 200) -> PredictionRegion:
    """ModSel-CP-LOO set on a grid by evaluating the definition at every grid point."""
    mc = ctx.model_class
    grid = default_grid(ctx, cs) if grid is None else grid
    ys = grid.points()
    mask = np.concatenate(
        [exact_loo_membership(mc, y_cal, cs.alpha, tb, ys[sl]) for sl in _chunks(ys, chunk)]
    )
    return _mask_to_region(ys, mask)


def enum_modsel_cp(mc: ModelClass, y_cal, alpha: float, tb: TieBreaker) -> PredictionRegion:
    """Label-space ModSel-CP set by direct enumeration of all labels."""
    labels = np.arange(mc.n_labels)
    mask = exact_modsel_cp_membership(mc, y_cal, alpha, tb, labels)
    return PredictionRegion.from_labels(labels[mask], mc.n_labels)


def enum_modsel_cp_loo(mc: ModelClass, y_cal, alpha: float, tb: TieBreaker) -> PredictionRegion:
    """Label-space ModSel-CP-LOO set by direct enumeration of all labels."""
    labels = np.arange(mc.n_labels)
    mask = exact_loo_membership(mc, y_cal, alpha, tb, labels)
    return PredictionRegion.from_labels(labels[mask], mc.n_labels)
