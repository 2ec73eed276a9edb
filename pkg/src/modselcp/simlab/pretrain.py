"""Pretraining recipes that turn training data into a candidate model class.

Each trained class knows how to evaluate itself on new inputs and to package
those evaluations as a :class:`~modselcp.scores.ModelClass`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scores import ModelClass
from .dgp import as_rng, softmax


# ---------------------------------------------------------------------------
# ridge on random feature subsets (residual score)
# ---------------------------------------------------------------------------


def ridge_fit(Z: np.ndarray, y: np.ndarray, penalty: float) -> np.ndarray:
    """Solve (Z'Z + penalty I) theta = Z'y (no intercept)."""
    if penalty <= 0:
        raise ValueError("ridge penalty must be positive")
    A = Z.T @ Z + penalty * np.eye(Z.shape[1])
    return np.linalg.solve(A, Z.T @ y)


@dataclass(frozen=True, eq=False)
class LinearModels:
    """f_lambda(x) = x' theta[:, lambda]."""

    theta: np.ndarray  # (d, n_models)

    @property
    def size(self) -> int:
        return self.theta.shape[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.theta  # (m, n_models)

    def model_class(self, X_cal: np.ndarray, X_test: np.ndarray) -> ModelClass:
        pc, pt = self.predict(X_cal), self.predict(X_test[None, :])[0]
        return ModelClass.residual(pc.T, pt)


def pretrain_ridge_subset_models(
    X: np.ndarray,
    y: np.ndarray,
    n_models: int,
    subset_frac: float = 0.1,
    penalty: float = 0.1,
    seed=None,
) -> LinearModels:
    """Ridge fits on uniformly random feature subsets, embedded back into R^d.

    Each model uses ``floor(subset_frac * d)`` (at least one) features.
    """
    if n_models < 1:
        raise ValueError("need at least one model")
    rng = as_rng(seed)
    d = X.shape[1]
    size = max(1, int(np.floor(subset_frac * d + 1e-9)))
    theta = np.zeros((d, n_models))
    for lam in range(n_models):
        feats = np.sort(rng.choice(d, size=size, replace=False))
        theta[feats, lam] = ridge_fit(X[:, feats], y, penalty)
    return LinearModels(theta)


# ---------------------------------------------------------------------------
# local scale by nearest neighbours (rescaled residual score)
# ---------------------------------------------------------------------------


def _sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


@dataclass(frozen=True, eq=False)
class RescaledLinearModels:
    """Linear predictors plus sigma(x) = mean |residual| over the k nearest reference points."""

    theta: np.ndarray  # (d, n_models)
    X_ref: np.ndarray  # (r, d)
    abs_res: np.ndarray  # (r, n_models)
    k: int
    floor: float = 1e-6

    @property
    def size(self) -> int:
        return self.theta.shape[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.theta

    def sigma(self, X: np.ndarray) -> np.ndarray:
        d2 = _sq_distances(X, self.X_ref)
        nn = np.argsort(d2, axis=1, kind="stable")[:, : self.k]  # (m, k)
        return np.maximum(self.floor, self.abs_res[nn].mean(axis=1))  # (m, n_models)

    def model_class(self, X_cal: np.ndarray, X_test: np.ndarray) -> ModelClass:
        X = np.vstack([X_cal, X_test[None, :]])
        pred, sig = self.predict(X), self.sigma(X)
        return ModelClass.rescaled(pred[:-1].T, pred[-1], sig[:-1].T, sig[-1])


def pretrain_sigma_estimators(
    X_ref: np.ndarray, y_ref: np.ndarray, models: LinearModels, k: int = 20, floor: float = 1e-6
) -> RescaledLinearModels:
    """Attach nearest-neighbour scale estimates, fitted on held-out training data."""
    if not 1 <= k <= X_ref.shape[0]:
        raise ValueError(f"k must lie in [1, {X_ref.shape[0]}]")
    abs_res = np.abs(y_ref[:, None] - models.predict(X_ref))
    return RescaledLinearModels(models.theta, X_ref, abs_res, int(k), floor)


# ---------------------------------------------------------------------------
# two shifted predictors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwoModelClass:
    """f_+(x) = x + C and f_-(x) = x - C (in that order)."""

    C: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")

    @property
    def size(self) -> int:
        return 2

    def predict(self, X: np.ndarray) -> np.ndarray:
        x = X[:, 0]
        return np.column_stack([x + self.C, x - self.C])

    def model_class(self, X_cal: np.ndarray, X_test: np.ndarray) -> ModelClass:
        return ModelClass.residual(self.predict(X_cal).T, self.predict(X_test[None, :])[0])


def two_model_class(C: float) -> TwoModelClass:
    return TwoModelClass(float(C))


# ---------------------------------------------------------------------------
# multinomial logistic classifiers (conditional density score)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SoftmaxClassifiers:
    """Per-model feature subset, standardisation and softmax-regression weights."""

    features: tuple[np.ndarray, ...]
    means: tuple[np.ndarray, ...]
    scales: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]  # each (|subset| + 1, K); last row is the intercept

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def n_labels(self) -> int:
        return self.weights[0].shape[1]

    def probs(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (n_models, m, K)."""
        out = []
        for f, mu, sd, W in zip(self.features, self.means, self.scales, self.weights):
            Z = (X[:, f] - mu) / sd
            out.append(softmax(Z @ W[:-1] + W[-1], axis=1))
        return np.stack(out)

    def model_class(self, X_cal: np.ndarray, X_test: np.ndarray) -> ModelClass:
        p = self.probs(np.vstack([X_cal, X_test[None, :]]))
        return ModelClass.density(p[:, :-1, :], p[:, -1, :])


def fit_softmax_regression(
    Z: np.ndarray, y: np.ndarray, n_labels: int, steps: int, rate: float, rng: np.random.Generator
) -> np.ndarray:
    """Full-batch gradient descent on the mean cross-entropy; returns (p + 1, K) weights."""
    m, p = Z.shape
    Zb = np.hstack([Z, np.ones((m, 1))])
    Y = np.zeros((m, n_labels))
    Y[np.arange(m), y] = 1.0
    W = 0.01 * rng.standard_normal((p + 1, n_labels))
    for _ in range(steps):
        P = softmax(Zb @ W, axis=1)
        W -= rate * (Zb.T @ (P - Y)) / m
    return W


def pretrain_classifiers(
    X: np.ndarray,
    y: np.ndarray,
    n_models: int,
    n_labels: int,
    seed=None,
    steps: int = 500,
    rate: float = 0.1,
    subset_frac: float = 0.5,
) -> SoftmaxClassifiers:
    """Softmax regressions on random feature subsets with random initialisations.

    Features are standardised with training-set moments before fitting.
    """
    if n_models < 1:
        raise ValueError("need at least one model")
    rng = as_rng(seed)
    d = X.shape[1]
    size = max(1, int(np.floor(subset_frac * d + 1e-9)))
    feats, means, scales, weights = [], [], [], []
    for _ in range(n_models):
        f = np.sort(rng.choice(d, size=size, replace=False))
        mu = X[:, f].mean(axis=0)
        sd = X[:, f].std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        W = fit_softmax_regression((X[:, f] - mu) / sd, y, n_labels, steps, rate, rng)
        feats.append(f)
        means.append(mu)
        scales.append(sd)
        weights.append(W)
    return SoftmaxClassifiers(tuple(feats), tuple(means), tuple(scales), tuple(weights))
