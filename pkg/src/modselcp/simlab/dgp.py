"""Synthetic data-generating processes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def student_t_vectors(rng: np.random.Generator, m: int, d: int, nu: float) -> np.ndarray:
    """Rows ~ multivariate t_nu(0, I_d): a standard normal vector over sqrt(chi2_nu / nu)."""
    z = rng.standard_normal((m, d))
    w = rng.chisquare(nu, size=(m, 1))
    return z * np.sqrt(nu / w)


@dataclass(frozen=True)
class RegressionLinear:
    """Y = X'theta + eps.

    ``theta="sparse"`` sets theta_j = 1 for j = 20, 40, ... (1-based) and uses
    unit noise; ``theta="dense"`` sets theta_j = 1/d with noise sd 1/d.
    ``x_dist`` / ``noise`` choose Gaussian or Student-t (``nu`` degrees of
    freedom) features and noise.
    """

    d: int = 300
    theta: str = "sparse"
    x_dist: str = "normal"
    noise: str = "normal"
    nu: float = 3.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.theta not in ("sparse", "dense"):
            raise ValueError(f"theta rule must be 'sparse' or 'dense', got {self.theta!r}")
        if self.x_dist not in ("normal", "t") or self.noise not in ("normal", "t"):
            raise ValueError("x_dist and noise must be 'normal' or 't'")
        if self.nu <= 0:
            raise ValueError("nu must be positive")

    def coefficients(self) -> np.ndarray:
        j = np.arange(1, self.d + 1)
        if self.theta == "sparse":
            return (j % 20 == 0).astype(float)
        return np.full(self.d, 1.0 / self.d)

    @property
    def noise_scale(self) -> float:
        return 1.0 if self.theta == "sparse" else 1.0 / self.d


@dataclass(frozen=True)
class Classification:
    """X_1 = 1 w.p. 1/5 else -8, X_2..X_d iid N(0, 1); Y | X multinomial softmax(X'beta)."""

    d: int = 50
    n_labels: int = 10

    def __post_init__(self):
        if self.d < 1 or self.n_labels < 2:
            raise ValueError("need d >= 1 and at least two labels")

    def draw_beta(self, seed) -> np.ndarray:
        """Class coefficient vectors beta_j ~ N(0, I_d), shape (K, d)."""
        return as_rng(seed).standard_normal((self.n_labels, self.d))


@dataclass(frozen=True)
class TwoModel:
    """Y = X + eps with X ~ N(0, 1), eps ~ N(mu, 1)."""

    C: float = 5.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")


DgpSpec = RegressionLinear | Classification | TwoModel


def gen_regression_data(spec: RegressionLinear, m: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw m points; returns X of shape (m, d) and y of shape (m,)."""
    if m < 1:
        raise ValueError("m must be positive")
    rng = as_rng(seed)
    if spec.x_dist == "normal":
        X = rng.standard_normal((m, spec.d))
    else:
        X = student_t_vectors(rng, m, spec.d, spec.nu)
    if spec.noise == "normal":
        eps = rng.standard_normal(m)
    else:
        eps = rng.standard_t(spec.nu, size=m)
    return X, X @ spec.coefficients() + spec.noise_scale * eps


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def class_weights(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """w_j(x) = softmax_j(x'beta_j), shape (m, K)."""
    return softmax(X @ beta.T, axis=1)


def gen_classification_data(spec: Classification, m: int, seed, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Draw m labelled points; ``beta`` is the (K, d) coefficient matrix."""
    if m < 1:
        raise ValueError("m must be positive")
    rng = as_rng(seed)
    X = np.empty((m, spec.d))
    X[:, 0] = np.where(rng.random(m) < 0.2, 1.0, -8.0)
    X[:, 1:] = rng.standard_normal((m, spec.d - 1))
    w = class_weights(X, beta)
    # inverse-cdf draw, one uniform per point
    u = rng.random(m)[:, None]
    y = np.minimum((np.cumsum(w, axis=1) < u).sum(axis=1), spec.n_labels - 1)
    return X, y


def gen_two_model_data(spec: TwoModel, m: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Returns X of shape (m, 1) and y of shape (m,)."""
    if m < 1:
        raise ValueError("m must be positive")
    rng = as_rng(seed)
    x = rng.standard_normal(m)
    eps = spec.mu + rng.standard_normal(m)
    return x[:, None], x + eps
