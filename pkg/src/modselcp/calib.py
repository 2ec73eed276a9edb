"""Empirical quantiles of calibration scores.

Quantile convention: the level-``tau`` quantile of ``m`` values is the k-th
smallest value with ``k = ceil(tau * m)``; ``k <= 0`` gives ``-inf`` and
``k > m`` gives ``+inf``. Under this convention the level ``1 - alpha``
quantile of n calibration scores plus one more value coincides with the level
``(1 - alpha)(1 + 1/n)`` quantile of the calibration scores alone whenever the
extra value is the largest, and every quantity below reduces to an order
statistic at rank ``k = ceil((1 - alpha)(n + 1))`` or a neighbour of it.
"""

from __future__ import annotations

import math

import numpy as np

from .pwl import PiecewiseLinearFn, pwl_clamp

_CEIL_SLACK = 1e-9


def quantile_rank(tau: float, m: int) -> int:
    """k = ceil(tau * m), robust to representation error (0.9 * 100 -> 90)."""
    x = tau * m
    r = round(x)
    if abs(x - r) <= _CEIL_SLACK * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def order_stat(sorted_values: np.ndarray, k, axis: int = -1):
    """k-th smallest (1-based) along ``axis`` of presorted values, with +-inf outside 1..m."""
    m = sorted_values.shape[axis]
    if k <= 0:
        shape = list(sorted_values.shape)
        del shape[axis]
        return np.full(shape, -math.inf) if shape else -math.inf
    if k > m:
        shape = list(sorted_values.shape)
        del shape[axis]
        return np.full(shape, math.inf) if shape else math.inf
    return np.take(sorted_values, k - 1, axis=axis)


def empirical_quantile(values, tau: float) -> float:
    """Level-``tau`` empirical quantile of a multiset of reals.

    Examples
    --------
    >>> empirical_quantile([3, 1, 2], 2 / 3)
    2.0
    >>> empirical_quantile([1, 2, 3], 1.05)
    inf
    """
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("empirical quantile of an empty multiset")
    k = quantile_rank(tau, arr.size)
    return float(order_stat(np.sort(arr), k))


class CalibrationScores:
    """Sorted calibration scores for every model of a class.

    Parameters
    ----------
    scores : array_like, shape (n_models, n) or (n,)
        Scores S^lambda(X_i, Y_i).
    alpha : float
        Miscoverage level in (0, 1).

    Attributes
    ----------
    sorted : ndarray (n_models, n)
        Scores of each model in ascending order.
    order : ndarray (n_models, n)
        ``sorted[l, r] == scores[l, order[l, r]]``.
    rank : ndarray (n_models, n)
        1-based position of point i in model l's sorted list (stable for ties).
    k : int
        ``ceil((1 - alpha)(n + 1))``.
    """

    def __init__(self, scores, alpha: float):
        arr = np.array(scores, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError("scores must be (n_models, n) with n >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("scores must be finite")
        if not (0.0 < alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = float(alpha)
        self.scores = arr
        self.order = np.argsort(arr, axis=1, kind="stable")
        self.sorted = np.take_along_axis(arr, self.order, axis=1)
        rank = np.empty_like(self.order)
        np.put_along_axis(rank, self.order, np.arange(1, arr.shape[1] + 1)[None, :], axis=1)
        self.rank = rank
        self.k = quantile_rank(1.0 - self.alpha, self.n + 1)
        for a in (self.scores, self.order, self.sorted, self.rank):
            a.setflags(write=False)

    @property
    def n(self) -> int:
        return self.scores.shape[1]

    @property
    def n_models(self) -> int:
        return self.scores.shape[0]

    def with_alpha(self, alpha: float) -> "CalibrationScores":
        return CalibrationScores(self.scores, alpha)

    def subset_points(self, idx) -> "CalibrationScores":
        return CalibrationScores(self.scores[:, np.asarray(idx, dtype=int)], self.alpha)

    def _stat(self, k: int, lam=None):
        vals = order_stat(self.sorted, k, axis=1)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (self.n_models,))
        return vals.copy() if lam is None else float(vals[int(lam)])

    def q_hat(self, lam=None):
        """k-th order statistic; all models when ``lam`` is None."""
        return self._stat(self.k, lam)

    def q_hat_minus(self, lam=None):
        return self._stat(self.k - 1, lam)

    def q_hat_plus(self, lam=None):
        return self._stat(self.k + 1, lam)

    def q_hat_aug(self, lam, s_test):
        """Quantile of the calibration scores augmented by test score(s) ``s_test``."""
        lo, hi = self.q_hat_minus(lam), self.q_hat(lam)
        return np.clip(s_test, lo, hi) if np.ndim(s_test) else float(min(hi, max(lo, s_test)))

    def q_hat_aug_all(self, s_test) -> np.ndarray:
        """Vectorised over models: ``s_test`` has the model on axis 0."""
        s = np.asarray(s_test, dtype=float)
        extra = (1,) * (s.ndim - 1)
        lo = self.q_hat_minus().reshape((-1,) + extra)
        hi = self.q_hat().reshape((-1,) + extra)
        return np.minimum(hi, np.maximum(lo, s))

    def loo_bounds(self, i: int | None = None):
        """Clamp bounds of the leave-one-out quantile.

        Dropping point i and adding a test score s gives ``clip(s, lo, hi)``
        where (lo, hi) depends only on where i sits relative to rank k.
        Returns arrays of shape (n_models,) for a given i, or (n_models, n)
        for all points when ``i`` is None.
        """
        qm, q, qp = self.q_hat_minus(), self.q_hat(), self.q_hat_plus()
        if i is None:
            rank = self.rank
            qm, q, qp = qm[:, None], q[:, None], qp[:, None]
        else:
            if not (0 <= i < self.n):
                raise IndexError(f"leave-out index {i} out of range for n={self.n}")
            rank = self.rank[:, i]
        lo = np.where(rank < self.k, q, qm)
        hi = np.where(rank > self.k, q, qp)
        return lo, hi

    def loo_case(self) -> np.ndarray:
        """0 if point ranks above k, 1 if at k, 2 if below: an (n_models, n) array."""
        return np.where(self.rank > self.k, 0, np.where(self.rank == self.k, 1, 2))

    def q_hat_loo(self, lam: int, i: int, s_test):
        lo, hi = self.loo_bounds(i)
        lo, hi = lo[int(lam)], hi[int(lam)]
        return np.clip(s_test, lo, hi) if np.ndim(s_test) else float(min(hi, max(lo, s_test)))

    def q_hat_loo_profile(self, lam: int, i: int, test_profile: PiecewiseLinearFn) -> PiecewiseLinearFn:
        """y -> leave-i-out quantile with the test score given by ``test_profile``."""
        lo, hi = self.loo_bounds(i)
        return pwl_clamp(test_profile, float(lo[int(lam)]), float(hi[int(lam)]))


def q_hat(cs: CalibrationScores, lam):
    return cs.q_hat(lam)


def q_hat_minus(cs: CalibrationScores, lam):
    return cs.q_hat_minus(lam)


def q_hat_plus(cs: CalibrationScores, lam):
    return cs.q_hat_plus(lam)


def q_hat_aug(cs: CalibrationScores, lam, s_test):
    return cs.q_hat_aug(lam, s_test)


def q_hat_loo(cs: CalibrationScores, lam, i, s_test):
    return cs.q_hat_loo(lam, i, s_test)


def q_hat_loo_profile(cs: CalibrationScores, lam, i, test_profile):
    return cs.q_hat_loo_profile(lam, i, test_profile)
