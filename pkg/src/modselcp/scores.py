"""Conformity-score families and the geometry of their prediction sets.

Four families are supported, each described by the values a pretrained model
takes on the calibration points and on the test point:

========== ====================================== ===========================
family     score S(x, y)                          set {y : S(x, y) <= q}
========== ====================================== ===========================
residual   |y - f(x)|                             [f - q, f + q]
rescaled   |y - f(x)| / sigma(x)                  [f - q sigma, f + q sigma]
cqr        max(qlo(x) - y, y - qhi(x))            [qlo - q, qhi + q]
density    -p(y | x)                              {y : p(y | x) >= -q}
========== ====================================== ===========================

A single model is a :class:`ModelEvaluations` value; a whole candidate
collection is a :class:`ModelClass`, which stores the same data stacked into
``(n_models, n)`` arrays so that the selection methods can vectorise over
models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence, Union

import numpy as np

from .pwl import PiecewiseLinearFn, pwl_eval
from .regions import PredictionRegion

RESIDUAL = "residual"
RESCALED = "rescaled"
CQR = "cqr"
DENSITY = "density"
FAMILIES = (RESIDUAL, RESCALED, CQR, DENSITY)
CONTINUOUS_FAMILIES = (RESIDUAL, RESCALED, CQR)

TEST = -1
"""Point index meaning "the test point" in :func:`set_size`."""

PROB_TOL = 1e-6


def _vec(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _check_probs(p: np.ndarray, name: str) -> None:
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > PROB_TOL):
        raise ValueError(f"{name} must be nonnegative and sum to 1")


# ---------------------------------------------------------------------------
# one model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Residual:
    """Point predictor f evaluated at the calibration points and the test point."""

    pred_calib: np.ndarray
    pred_test: float
    family: ClassVar[str] = RESIDUAL

    def __post_init__(self):
        object.__setattr__(self, "pred_calib", _vec(self.pred_calib, "pred_calib"))
        object.__setattr__(self, "pred_test", float(self.pred_test))

    @property
    def n(self) -> int:
        return self.pred_calib.size


@dataclass(frozen=True, eq=False)
class RescaledResidual:
    """Point predictor plus a positive local scale estimate sigma."""

    pred_calib: np.ndarray
    pred_test: float
    sigma_calib: np.ndarray
    sigma_test: float
    family: ClassVar[str] = RESCALED

    def __post_init__(self):
        object.__setattr__(self, "pred_calib", _vec(self.pred_calib, "pred_calib"))
        object.__setattr__(self, "sigma_calib", _vec(self.sigma_calib, "sigma_calib"))
        object.__setattr__(self, "pred_test", float(self.pred_test))
        object.__setattr__(self, "sigma_test", float(self.sigma_test))
        if self.sigma_calib.size != self.pred_calib.size:
            raise ValueError("sigma_calib and pred_calib lengths differ")
        if np.any(self.sigma_calib <= 0) or not self.sigma_test > 0:
            raise ValueError("sigma must be positive")

    @property
    def n(self) -> int:
        return self.pred_calib.size


@dataclass(frozen=True, eq=False)
class Cqr:
    """Lower and upper conditional-quantile predictions."""

    qlo_calib: np.ndarray
    qhi_calib: np.ndarray
    qlo_test: float
    qhi_test: float
    family: ClassVar[str] = CQR

    def __post_init__(self):
        object.__setattr__(self, "qlo_calib", _vec(self.qlo_calib, "qlo_calib"))
        object.__setattr__(self, "qhi_calib", _vec(self.qhi_calib, "qhi_calib"))
        object.__setattr__(self, "qlo_test", float(self.qlo_test))
        object.__setattr__(self, "qhi_test", float(self.qhi_test))
        if self.qlo_calib.size != self.qhi_calib.size:
            raise ValueError("qlo_calib and qhi_calib lengths differ")
        if np.any(self.qlo_calib > self.qhi_calib) or self.qlo_test > self.qhi_test:
            raise ValueError("need qlo <= qhi at every point")

    @property
    def n(self) -> int:
        return self.qlo_calib.size


@dataclass(frozen=True, eq=False)
class CondDensity:
    """Class-probability vectors over K labels."""

    p_calib: np.ndarray
    p_test: np.ndarray
    family: ClassVar[str] = DENSITY

    def __post_init__(self):
        p_calib = np.array(self.p_calib, dtype=float)
        p_test = np.array(self.p_test, dtype=float).reshape(-1)
        if p_calib.ndim != 2 or p_calib.shape[1] != p_test.size:
            raise ValueError("p_calib must be (n, K) with K = len(p_test)")
        _check_probs(p_calib, "p_calib")
        _check_probs(p_test, "p_test")
        p_calib.setflags(write=False)
        p_test.setflags(write=False)
        object.__setattr__(self, "p_calib", p_calib)
        object.__setattr__(self, "p_test", p_test)

    @property
    def n(self) -> int:
        return self.p_calib.shape[0]

    @property
    def n_labels(self) -> int:
        return self.p_test.size


ModelEvaluations = Union[Residual, RescaledResidual, Cqr, CondDensity]


def _check_index(model: ModelEvaluations, i: int) -> None:
    if not (0 <= i < model.n):
        raise IndexError(f"calibration index {i} out of range for n={model.n}")


def score_calib(model: ModelEvaluations, i: int, y_i) -> float:
    """Score of calibration point i with response ``y_i``."""
    _check_index(model, i)
    if isinstance(model, Residual):
        return abs(float(y_i) - model.pred_calib[i])
    if isinstance(model, RescaledResidual):
        return abs(float(y_i) - model.pred_calib[i]) / model.sigma_calib[i]
    if isinstance(model, Cqr):
        y = float(y_i)
        return max(model.qlo_calib[i] - y, y - model.qhi_calib[i])
    label = int(y_i)
    if not (0 <= label < model.n_labels):
        raise IndexError(f"label {label} out of range for K={model.n_labels}")
    return -float(model.p_calib[i, label])


def score_profile_test(model: ModelEvaluations):
    """y -> S(x_test, y): a piecewise-linear function, or a K-vector for labels."""
    if isinstance(model, Residual):
        return PiecewiseLinearFn.vee(model.pred_test)
    if isinstance(model, RescaledResidual):
        return PiecewiseLinearFn.vee(model.pred_test, 1.0 / model.sigma_test)
    if isinstance(model, Cqr):
        lo, hi = model.qlo_test, model.qhi_test
        mid = 0.5 * (lo + hi)
        return PiecewiseLinearFn(np.array([mid]), -0.5 * (hi - lo), np.array([-1.0, 1.0]))
    return -model.p_test.copy()


def score_test(model: ModelEvaluations, y) -> float:
    """Score of the test point for a hypothesised response y."""
    if isinstance(model, CondDensity):
        return -float(model.p_test[int(y)])
    return float(pwl_eval(score_profile_test(model), y))


def region_at_threshold(model: ModelEvaluations, q: float) -> PredictionRegion:
    """{y : S(x_test, y) <= q}."""
    if isinstance(model, CondDensity):
        if q == math.inf:
            return PredictionRegion.entire(model.n_labels)
        return PredictionRegion.from_labels(np.flatnonzero(model.p_test >= -q), model.n_labels)
    if q == math.inf:
        return PredictionRegion.entire()
    if q == -math.inf:
        return PredictionRegion.empty()
    if isinstance(model, Residual):
        lo, hi = model.pred_test - q, model.pred_test + q
    elif isinstance(model, RescaledResidual):
        lo, hi = model.pred_test - q * model.sigma_test, model.pred_test + q * model.sigma_test
    else:
        lo, hi = model.qlo_test - q, model.qhi_test + q
    if lo > hi:
        return PredictionRegion.empty()
    return PredictionRegion.from_intervals([(lo, hi)], tol=0.0)


def set_size(model: ModelEvaluations, point: int, q: float) -> float:
    """|{y : S(x, y) <= q}| at calibration point ``point`` (or ``TEST``)."""
    if point != TEST:
        _check_index(model, point)
    if q == math.inf:
        return float(model.n_labels) if isinstance(model, CondDensity) else math.inf
    if isinstance(model, Residual):
        return max(0.0, 2.0 * q)
    if isinstance(model, RescaledResidual):
        sigma = model.sigma_test if point == TEST else model.sigma_calib[point]
        return max(0.0, 2.0 * q) * sigma
    if isinstance(model, Cqr):
        if point == TEST:
            gap = model.qhi_test - model.qlo_test
        else:
            gap = model.qhi_calib[point] - model.qlo_calib[point]
        return max(0.0, gap + 2.0 * q)
    p = model.p_test if point == TEST else model.p_calib[point]
    return float(np.count_nonzero(p >= -q))


# ---------------------------------------------------------------------------
# a collection of models
# ---------------------------------------------------------------------------


def _stack(rows, name: str, ndim: int) -> np.ndarray:
    arr = np.array(rows, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} has shape {arr.shape}; expected {ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelClass:
    """A finite, ordered collection of pretrained models of one family.

    Arrays are indexed ``[model, calibration point]``; test-point arrays are
    indexed ``[model]``. Model order is the canonical order used for
    tie-breaking. Only the arrays relevant to ``family`` are populated.

    Construct with :meth:`residual`, :meth:`rescaled`, :meth:`cqr`,
    :meth:`density` or :meth:`from_models`.
    """

    family: str
    pred_calib: np.ndarray | None = None
    pred_test: np.ndarray | None = None
    sigma_calib: np.ndarray | None = None
    sigma_test: np.ndarray | None = None
    qlo_calib: np.ndarray | None = None
    qhi_calib: np.ndarray | None = None
    qlo_test: np.ndarray | None = None
    qhi_test: np.ndarray | None = None
    p_calib: np.ndarray | None = None
    p_test: np.ndarray | None = None
    _models: list = field(default_factory=list, repr=False)

    # -- constructors -------------------------------------------------------

    @classmethod
    def residual(cls, pred_calib, pred_test) -> "ModelClass":
        pc = _stack(pred_calib, "pred_calib", 2)
        pt = _stack(pred_test, "pred_test", 1)
        if pt.size != pc.shape[0]:
            raise ValueError("pred_test needs one entry per model")
        return cls._finish(cls(RESIDUAL, pred_calib=pc, pred_test=pt))

    @classmethod
    def rescaled(cls, pred_calib, pred_test, sigma_calib, sigma_test) -> "ModelClass":
        pc = _stack(pred_calib, "pred_calib", 2)
        pt = _stack(pred_test, "pred_test", 1)
        sc = _stack(sigma_calib, "sigma_calib", 2)
        st = _stack(sigma_test, "sigma_test", 1)
        if sc.shape != pc.shape or st.shape != pt.shape or pt.size != pc.shape[0]:
            raise ValueError("inconsistent shapes for rescaled model class")
        if np.any(sc <= 0) or np.any(st <= 0):
            raise ValueError("sigma must be positive")
        return cls._finish(cls(RESCALED, pred_calib=pc, pred_test=pt, sigma_calib=sc, sigma_test=st))

    @classmethod
    def cqr(cls, qlo_calib, qhi_calib, qlo_test, qhi_test) -> "ModelClass":
        lc = _stack(qlo_calib, "qlo_calib", 2)
        hc = _stack(qhi_calib, "qhi_calib", 2)
        lt = _stack(qlo_test, "qlo_test", 1)
        ht = _stack(qhi_test, "qhi_test", 1)
        if hc.shape != lc.shape or lt.shape != ht.shape or lt.size != lc.shape[0]:
            raise ValueError("inconsistent shapes for cqr model class")
        if np.any(lc > hc) or np.any(lt > ht):
            raise ValueError("need qlo <= qhi at every point")
        return cls._finish(cls(CQR, qlo_calib=lc, qhi_calib=hc, qlo_test=lt, qhi_test=ht))

    @classmethod
    def density(cls, p_calib, p_test) -> "ModelClass":
        pc = _stack(p_calib, "p_calib", 3)
        pt = _stack(p_test, "p_test", 2)
        if pt.shape[0] != pc.shape[0] or pt.shape[1] != pc.shape[2]:
            raise ValueError("p_calib must be (models, n, K) and p_test (models, K)")
        _check_probs(pc, "p_calib")
        _check_probs(pt, "p_test")
        return cls._finish(cls(DENSITY, p_calib=pc, p_test=pt))

    @classmethod
    def from_models(cls, models: Sequence[ModelEvaluations]) -> "ModelClass":
        models = list(models)
        if not models:
            raise ValueError("a model class needs at least one model")
        kinds = {type(m) for m in models}
        if len(kinds) != 1:
            raise ValueError("all models must belong to the same score family")
        if len({m.n for m in models}) != 1:
            raise ValueError("all models must share the calibration size")
        m0 = models[0]
        if isinstance(m0, Residual):
            return cls.residual([m.pred_calib for m in models], [m.pred_test for m in models])
        if isinstance(m0, RescaledResidual):
            return cls.rescaled(
                [m.pred_calib for m in models],
                [m.pred_test for m in models],
                [m.sigma_calib for m in models],
                [m.sigma_test for m in models],
            )
        if isinstance(m0, Cqr):
            return cls.cqr(
                [m.qlo_calib for m in models],
                [m.qhi_calib for m in models],
                [m.qlo_test for m in models],
                [m.qhi_test for m in models],
            )
        return cls.density([m.p_calib for m in models], [m.p_test for m in models])

    @staticmethod
    def _finish(mc: "ModelClass") -> "ModelClass":
        if mc.size == 0 or mc.n == 0:
            raise ValueError("need at least one model and one calibration point")
        return mc

    # -- shape --------------------------------------------------------------

    def _calib_array(self) -> np.ndarray:
        for name in ("pred_calib", "qlo_calib", "p_calib"):
            arr = getattr(self, name)
            if arr is not None:
                return arr
        raise AssertionError("empty model class")

    @property
    def size(self) -> int:
        """Number of models |Lambda|."""
        return self._calib_array().shape[0]

    def __len__(self) -> int:
        return self.size

    @property
    def n(self) -> int:
        """Calibration size."""
        return self._calib_array().shape[1]

    @property
    def discrete(self) -> bool:
        return self.family == DENSITY

    @property
    def n_labels(self) -> int | None:
        return self.p_test.shape[1] if self.discrete else None

    def __getitem__(self, lam: int) -> ModelEvaluations:
        lam = int(lam)
        if not (0 <= lam < self.size):
            raise IndexError(f"model index {lam} out of range for {self.size} models")
        if not self._models:
            self._models.extend([None] * self.size)
        if self._models[lam] is None:
            self._models[lam] = self._build(lam)
        return self._models[lam]

    def _build(self, lam: int) -> ModelEvaluations:
        if self.family == RESIDUAL:
            return Residual(self.pred_calib[lam], self.pred_test[lam])
        if self.family == RESCALED:
            return RescaledResidual(
                self.pred_calib[lam], self.pred_test[lam], self.sigma_calib[lam], self.sigma_test[lam]
            )
        if self.family == CQR:
            return Cqr(self.qlo_calib[lam], self.qhi_calib[lam], self.qlo_test[lam], self.qhi_test[lam])
        return CondDensity(self.p_calib[lam], self.p_test[lam])

    def subset_points(self, idx) -> "ModelClass":
        """The same models restricted to calibration points ``idx``."""
        idx = np.asarray(idx, dtype=int)
        kw = {}
        for name in ("pred_calib", "sigma_calib", "qlo_calib", "qhi_calib", "p_calib"):
            arr = getattr(self, name)
            if arr is not None:
                kw[name] = arr[:, idx]
        for name in ("pred_test", "sigma_test", "qlo_test", "qhi_test", "p_test"):
            arr = getattr(self, name)
            if arr is not None:
                kw[name] = arr
        return ModelClass._finish(ModelClass(self.family, **kw))

    def subset_models(self, lams) -> "ModelClass":
        """A smaller class containing models ``lams`` (in that order)."""
        lams = np.asarray(lams, dtype=int)
        kw = {}
        for name in (
            "pred_calib", "sigma_calib", "qlo_calib", "qhi_calib", "p_calib",
            "pred_test", "sigma_test", "qlo_test", "qhi_test", "p_test",
        ):
            arr = getattr(self, name)
            if arr is not None:
                kw[name] = arr[lams]
        return ModelClass._finish(ModelClass(self.family, **kw))

    # -- vectorised scores ----------------------------------------------------

    def calib_scores(self, y) -> np.ndarray:
        """Scores S^lambda(X_i, Y_i) as an ``(n_models, n)`` array."""
        y = np.asarray(y)
        if y.shape != (self.n,):
            raise ValueError(f"need {self.n} calibration responses, got shape {y.shape}")
        if self.family == RESIDUAL:
            return np.abs(y[None, :] - self.pred_calib)
        if self.family == RESCALED:
            return np.abs(y[None, :] - self.pred_calib) / self.sigma_calib
        if self.family == CQR:
            return np.maximum(self.qlo_calib - y[None, :], y[None, :] - self.qhi_calib)
        labels = y.astype(int)
        if np.any(labels < 0) or np.any(labels >= self.n_labels) or np.any(labels != y):
            raise ValueError("labels must be integers in [0, K)")
        return -self.p_calib[:, np.arange(self.n), labels]

    def test_scores(self, y) -> np.ndarray:
        """Test-point scores at hypothesised responses: ``(n_models, len(y))``.

        For label spaces ``y`` may be omitted, giving all K labels.
        """
        if self.discrete:
            if y is None:
                return -self.p_test
            return -self.p_test[:, np.asarray(y, dtype=int)]
        y = np.asarray(y, dtype=float).reshape(-1)
        if self.family == RESIDUAL:
            return np.abs(y[None, :] - self.pred_test[:, None])
        if self.family == RESCALED:
            return np.abs(y[None, :] - self.pred_test[:, None]) / self.sigma_test[:, None]
        return np.maximum(self.qlo_test[:, None] - y[None, :], y[None, :] - self.qhi_test[:, None])

    def test_profile(self, lam: int):
        return score_profile_test(self[lam])

    def region(self, lam: int, q: float) -> PredictionRegion:
        return region_at_threshold(self[lam], q)

    def centers(self) -> np.ndarray:
        """Centre of each model's test-point prediction set (continuous families)."""
        if self.family in (RESIDUAL, RESCALED):
            return np.asarray(self.pred_test)
        if self.family == CQR:
            return 0.5 * (self.qlo_test + self.qhi_test)
        raise ValueError("label-space models have no centre")
