"""Mean-set-size loss L(lambda, q) and its piecewise-linear profile in q.

The loss of model ``lam`` at threshold ``q`` is the average, over a fixed set
of evaluation points, of the size of ``{y : S(x, y) <= q}``. By default the
evaluation points are all calibration inputs plus the test input.
"""

from __future__ import annotations

import math

import numpy as np

from .pwl import PiecewiseLinearFn, pwl_invert_monotone
from .scores import CQR, DENSITY, RESCALED, RESIDUAL, ModelClass


class LossContext:
    """Loss evaluator bound to one model class and one set of evaluation points.

    Parameters
    ----------
    model_class : ModelClass
        Candidate models.
    calib_idx : array_like of int, optional
        Calibration points included in the average (default: all of them).
    include_test : bool, default True
        Whether the test input is one of the evaluation points.
    """

    def __init__(self, model_class: ModelClass, calib_idx=None, include_test: bool = True):
        self.model_class = model_class
        idx = np.arange(model_class.n) if calib_idx is None else np.asarray(calib_idx, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= model_class.n):
            raise IndexError("calibration index out of range")
        self.calib_idx = idx
        self.include_test = bool(include_test)
        self.m = idx.size + int(self.include_test)
        if self.m == 0:
            raise ValueError("the loss needs at least one evaluation point")
        self.family = model_class.family
        self._profiles: dict[int, PiecewiseLinearFn] = {}
        mc = model_class
        if self.family == RESCALED:
            sig = self._eval_values(mc.sigma_calib, mc.sigma_test)
            self.mean_sigma = sig.mean(axis=1)
        elif self.family == CQR:
            gaps = self._eval_values(mc.qhi_calib - mc.qlo_calib, mc.qhi_test - mc.qlo_test)
            self.gaps = np.sort(gaps, axis=1)
            # suffix sums: _gap_tail[l, j] = sum of gaps[l, j:]
            tail = np.cumsum(self.gaps[:, ::-1], axis=1)[:, ::-1]
            self._gap_tail = np.concatenate([tail, np.zeros((mc.size, 1))], axis=1)
        elif self.family == DENSITY:
            p = self._eval_values(mc.p_calib, mc.p_test)
            self.probs = np.sort(p.reshape(mc.size, -1), axis=1)

    def _eval_values(self, calib: np.ndarray, test: np.ndarray) -> np.ndarray:
        parts = [calib[:, self.calib_idx]]
        if self.include_test:
            parts.append(test[:, None])
        return np.concatenate(parts, axis=1)

    @property
    def n_models(self) -> int:
        return self.model_class.size

    @property
    def discrete(self) -> bool:
        return self.family == DENSITY

    # -- evaluation -------------------------------------------------------------

    def loss(self, lam, q):
        """L(lam, q); ``lam`` and ``q`` broadcast against each other."""
        lam_arr = np.asarray(lam)
        if lam_arr.dtype.kind not in "iu":
            raise TypeError("model index must be an integer")
        if np.any(lam_arr < 0) or np.any(lam_arr >= self.n_models):
            raise IndexError("model index out of range")
        q_arr = np.asarray(q, dtype=float)
        lam_b, q_b = np.broadcast_arrays(lam_arr, q_arr)
        out = self._loss(lam_b.reshape(-1), q_b.reshape(-1)).reshape(q_b.shape)
        return float(out) if out.ndim == 0 else out

    def loss_all(self, q) -> np.ndarray:
        """L(lam, q[lam, ...]) for every model; ``q`` has the model on axis 0."""
        q = np.asarray(q, dtype=float)
        if q.shape[0] != self.n_models:
            raise ValueError("first axis of q must index models")
        lam = np.arange(self.n_models).reshape((-1,) + (1,) * (q.ndim - 1))
        return self.loss(lam, q)

    def _loss(self, lam: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.family == RESIDUAL:
            out = 2.0 * np.maximum(0.0, q)
        elif self.family == RESCALED:
            with np.errstate(invalid="ignore"):
                out = 2.0 * np.maximum(0.0, q) * self.mean_sigma[lam]
        elif self.family == CQR:
            out = np.empty(q.shape)
            for l in np.unique(lam):
                sel = lam == l
                qs = q[sel]
                j = np.searchsorted(self.gaps[l], -2.0 * qs, side="right")
                count = self.gaps.shape[1] - j
                with np.errstate(invalid="ignore"):
                    total = self._gap_tail[l, j] + 2.0 * qs * count
                out[sel] = np.where(count == 0, 0.0, total) / self.m
        else:
            out = np.empty(q.shape)
            size = self.probs.shape[1]
            for l in np.unique(lam):
                sel = lam == l
                j = np.searchsorted(self.probs[l], -q[sel], side="left")
                out[sel] = (size - j) / self.m
        if self.family != DENSITY:
            out = np.where(q == math.inf, math.inf, out)
        return out

    # -- profile and inversion -----------------------------------------------------

    def loss_profile(self, lam: int) -> PiecewiseLinearFn:
        """q -> L(lam, q) as an exact nondecreasing piecewise-linear function."""
        if self.discrete:
            raise ValueError("label-space losses are step functions; use loss()")
        lam = int(lam)
        if lam in self._profiles:
            return self._profiles[lam]
        if self.family == RESIDUAL:
            prof = PiecewiseLinearFn(np.array([0.0]), 0.0, np.array([0.0, 2.0]))
        elif self.family == RESCALED:
            prof = PiecewiseLinearFn(np.array([0.0]), 0.0, np.array([0.0, 2.0 * self.mean_sigma[lam]]))
        else:
            # point j contributes max(0, g_j + 2q) / m, which switches on at q = -g_j / 2
            starts = -0.5 * self.gaps[lam][::-1]
            knots, counts = np.unique(starts, return_counts=True)
            slopes = np.concatenate(([0.0], 2.0 * np.cumsum(counts) / self.m))
            prof = PiecewiseLinearFn(knots, 0.0, slopes)
        self._profiles[lam] = prof
        return prof

    def invert_loss(self, lam: int, target: float, strict: bool = False) -> float:
        """sup{q : L(lam, q) <= target} (``<`` when ``strict``).

        For label spaces the loss is a step function and the supremum is not
        attained; the largest candidate threshold (a negated probability among
        the evaluation points) whose loss is within ``target`` is returned
        instead, which yields the same prediction set.
        """
        if not self.discrete:
            return pwl_invert_monotone(self.loss_profile(lam), target, strict=strict)
        lam = int(lam)
        if math.isnan(target):
            raise ValueError("target is NaN")
        below = np.less if strict else np.less_equal
        if below(self.loss(lam, math.inf), target):
            return math.inf
        cands = -np.unique(self.probs[lam])[::-1]  # ascending thresholds
        vals = self.loss(np.full(cands.shape, lam), cands)
        ok = np.flatnonzero(below(vals, target))
        return float(cands[ok[-1]]) if ok.size else -math.inf


def loss(ctx: LossContext, lam: int, q: float) -> float:
    return ctx.loss(lam, q)


def loss_profile(ctx: LossContext, lam: int) -> PiecewiseLinearFn:
    return ctx.loss_profile(lam)


def invert_loss(ctx: LossContext, lam: int, target: float, strict: bool = False) -> float:
    return ctx.invert_loss(lam, target, strict)
