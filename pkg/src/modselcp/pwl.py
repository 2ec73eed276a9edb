"""Continuous piecewise-linear functions of one real variable.

A function is stored as its knots, its value at the first knot and one slope
per piece (the two unbounded end pieces included). Everything here is
immutable and side-effect free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REL_TOL = 1e-9


def tol_eq(scale: float = 0.0) -> float:
    """Equality tolerance used by intersection and inversion."""
    return REL_TOL * (1.0 + abs(scale))


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """y -> f(y), continuous and piecewise linear.

    ``slopes[0]`` applies left of ``knots[0]``, ``slopes[j]`` between
    ``knots[j-1]`` and ``knots[j]``, ``slopes[-1]`` right of the last knot.
    """

    knots: np.ndarray
    value_at_first_knot: float
    slopes: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        slopes = np.asarray(self.slopes, dtype=float).reshape(-1)
        if slopes.size != knots.size + 1:
            raise ValueError(
                f"need {knots.size + 1} slopes for {knots.size} knots, got {slopes.size}"
            )
        if knots.size and not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if knots.size == 0 and slopes[0] != 0:
            raise ValueError("a function without knots is a constant and needs slope 0")
        knots.setflags(write=False)
        slopes.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "value_at_first_knot", float(self.value_at_first_knot))

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "PiecewiseLinearFn":
        return cls(np.empty(0), c, np.zeros(1))

    @classmethod
    def linear(cls, slope: float, intercept: float, at: float = 0.0) -> "PiecewiseLinearFn":
        """slope * y + intercept, with a (redundant) knot placed at ``at``."""
        if slope == 0:
            return cls.constant(intercept)
        return cls(np.array([at]), slope * at + intercept, np.array([slope, slope]))

    @classmethod
    def vee(cls, center: float, scale: float = 1.0) -> "PiecewiseLinearFn":
        """scale * |y - center|."""
        return cls(np.array([center]), 0.0, np.array([-scale, scale]))

    # -- basic queries ------------------------------------------------------

    @property
    def knot_values(self) -> np.ndarray:
        if self.knots.size == 0:
            return np.empty(0)
        steps = self.slopes[1:-1] * np.diff(self.knots)
        return self.value_at_first_knot + np.concatenate(([0.0], np.cumsum(steps)))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.slopes == 0))

    def is_nondecreasing(self) -> bool:
        return bool(np.all(self.slopes >= 0))

    def scale(self) -> float:
        vals = self.knot_values
        return float(np.max(np.abs(vals))) if vals.size else abs(self.value_at_first_knot)

    def slope_at(self, y: float) -> float:
        """Slope of the piece containing y (right piece at a knot)."""
        return float(self.slopes[np.searchsorted(self.knots, y, side="right")])

    def __call__(self, y):
        return pwl_eval(self, y)

    def __repr__(self) -> str:
        return (
            f"PiecewiseLinearFn(knots={self.knots.tolist()}, "
            f"value_at_first_knot={self.value_at_first_knot!r}, slopes={self.slopes.tolist()})"
        )


def pwl_eval(f: PiecewiseLinearFn, y):
    """Evaluate f at a scalar or array; infinite y gives the end-piece limit."""
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if f.knots.size == 0:
        out = np.full(y_arr.shape, f.value_at_first_knot)
    else:
        vals = f.knot_values
        piece = np.searchsorted(f.knots, y_arr, side="right")
        anchor = np.maximum(piece - 1, 0)
        with np.errstate(invalid="ignore"):
            out = vals[anchor] + f.slopes[piece] * (y_arr - f.knots[anchor])
        inf = np.isinf(y_arr)
        if inf.any():
            end_slope = np.where(y_arr[inf] > 0, f.slopes[-1], f.slopes[0])
            end_val = np.where(y_arr[inf] > 0, vals[-1], vals[0])
            with np.errstate(invalid="ignore"):
                out[inf] = np.where(end_slope == 0, end_val, np.sign(y_arr[inf]) * np.sign(end_slope) * np.inf)
    return float(out[0]) if scalar else out


def _solve_level(f: PiecewiseLinearFn, level: float) -> list[float]:
    """Points where a non-flat piece of f crosses ``level`` (flat pieces skipped)."""
    if not math.isfinite(level) or f.knots.size == 0:
        return []
    k, v, s = f.knots, f.knot_values, f.slopes
    out = []
    if s[0] != 0:
        y = k[0] + (level - v[0]) / s[0]
        if y < k[0]:
            out.append(y)
    for j in range(1, k.size):
        if s[j] == 0:
            continue
        lo, hi = min(v[j - 1], v[j]), max(v[j - 1], v[j])
        if lo < level < hi:
            out.append(k[j - 1] + (level - v[j - 1]) / s[j])
    if s[-1] != 0:
        y = k[-1] + (level - v[-1]) / s[-1]
        if y > k[-1]:
            out.append(y)
    return out


def _probe_points(breaks: np.ndarray) -> np.ndarray:
    """One interior point per piece of the partition induced by ``breaks``."""
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    pad = 1.0 + (breaks[-1] - breaks[0])
    return np.concatenate(([breaks[0] - pad], mids, [breaks[-1] + pad]))


def _unique_sorted(points) -> np.ndarray:
    arr = np.unique(np.asarray(points, dtype=float))
    return arr[np.isfinite(arr)]


def pwl_clamp(f: PiecewiseLinearFn, lo: float, hi: float) -> PiecewiseLinearFn:
    """y -> min(hi, max(lo, f(y))); new knots are inserted where f crosses a bound."""
    if lo > hi:
        raise ValueError(f"clamp bounds out of order: lo={lo} > hi={hi}")
    if lo == -math.inf and hi == math.inf:
        return f
    if f.knots.size == 0:
        return PiecewiseLinearFn.constant(min(hi, max(lo, f.value_at_first_knot)))
    breaks = _unique_sorted(list(f.knots) + _solve_level(f, lo) + _solve_level(f, hi))
    probes = pwl_eval(f, _probe_points(breaks))
    inside = (probes > lo) & (probes < hi)
    slopes = np.where(inside, [f.slope_at(p) for p in _probe_points(breaks)], 0.0)
    v0 = min(hi, max(lo, pwl_eval(f, breaks[0])))
    return PiecewiseLinearFn(breaks, v0, slopes)


def pwl_compose_monotone(g: PiecewiseLinearFn, f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """y -> g(f(y)) for a nondecreasing outer function g."""
    if not g.is_nondecreasing():
        raise ValueError("outer function must be monotone nondecreasing")
    if f.knots.size == 0:
        return PiecewiseLinearFn.constant(pwl_eval(g, f.value_at_first_knot))
    pre = [y for t in g.knots for y in _solve_level(f, t)]
    breaks = _unique_sorted(list(f.knots) + pre)
    probes = _probe_points(breaks)
    inner = pwl_eval(f, probes)
    slopes = np.array([g.slope_at(u) * f.slope_at(p) for u, p in zip(inner, probes)])
    v0 = pwl_eval(g, pwl_eval(f, breaks[0]))
    return PiecewiseLinearFn(breaks, v0, slopes)


def pwl_identical(f: PiecewiseLinearFn, g: PiecewiseLinearFn) -> bool:
    """True when f and g agree everywhere (within tolerance)."""
    breaks = _unique_sorted(list(f.knots) + list(g.knots))
    tol = tol_eq(max(f.scale(), g.scale()))
    if breaks.size == 0:
        return abs(f.value_at_first_knot - g.value_at_first_knot) <= tol
    diff = pwl_eval(f, breaks) - pwl_eval(g, breaks)
    return bool(
        np.all(np.abs(diff) <= tol)
        and abs(f.slopes[0] - g.slopes[0]) <= REL_TOL
        and abs(f.slopes[-1] - g.slopes[-1]) <= REL_TOL
    )


def pwl_intersections(f: PiecewiseLinearFn, g: PiecewiseLinearFn) -> list[float]:
    """Sign-change points of f - g plus the endpoints of every interval where f == g.

    Identical functions give an empty list (see ``pwl_identical``).
    """
    breaks = _unique_sorted(list(f.knots) + list(g.knots))
    tol = tol_eq(max(f.scale(), g.scale()))
    if breaks.size == 0:
        return []
    h = pwl_eval(f, breaks) - pwl_eval(g, breaks)
    left = f.slopes[0] - g.slopes[0]
    right = f.slopes[-1] - g.slopes[-1]
    sign = np.where(np.abs(h) <= tol, 0, np.sign(h)).astype(int)
    # as y -> -inf the difference behaves like -left * inf
    s_left = int(-np.sign(left)) if abs(left) > REL_TOL else int(sign[0])
    s_right = int(np.sign(right)) if abs(right) > REL_TOL else int(sign[-1])

    out: list[float] = []
    m = breaks.size
    if s_left * sign[0] < 0:
        out.append(breaks[0] - h[0] / left)
    j = 0
    while j < m:
        if sign[j] != 0:
            if j + 1 < m and sign[j + 1] != 0 and sign[j] != sign[j + 1]:
                a, b = breaks[j], breaks[j + 1]
                out.append(a + (b - a) * h[j] / (h[j] - h[j + 1]))
            j += 1
            continue
        run_end = j
        while run_end + 1 < m and sign[run_end + 1] == 0:
            run_end += 1
        before = sign[j - 1] if j > 0 else s_left
        after = sign[run_end + 1] if run_end + 1 < m else s_right
        if run_end > j:
            if not (j == 0 and s_left == 0):
                out.append(breaks[j])
            if not (run_end == m - 1 and s_right == 0):
                out.append(breaks[run_end])
        else:
            flat_left = j == 0 and s_left == 0
            flat_right = j == m - 1 and s_right == 0
            if flat_left != flat_right or (not flat_left and before * after < 0):
                out.append(breaks[j])
        j = run_end + 1
    if s_right * sign[-1] < 0:
        out.append(breaks[-1] - h[-1] / right)
    return sorted({float(v) for v in out})


def pwl_invert_monotone(g: PiecewiseLinearFn, target: float, strict: bool = False) -> float:
    """sup{q : g(q) <= target} for nondecreasing g; may be +inf or -inf.

    With ``strict=True`` returns sup{q : g(q) < target} instead, which differs
    only when g has a plateau exactly at ``target``.
    """
    if not g.is_nondecreasing():
        raise ValueError("function must be monotone nondecreasing")
    if math.isnan(target):
        raise ValueError("target is NaN")
    if target == math.inf:
        return math.inf
    if target == -math.inf:
        return -math.inf
    below = (lambda a: a < target) if strict else (lambda a: a <= target)
    if g.knots.size == 0:
        return math.inf if below(g.value_at_first_knot) else -math.inf
    k, v, s = g.knots, g.knot_values, g.slopes
    if below(v[-1]):
        return k[-1] + (target - v[-1]) / s[-1] if s[-1] > 0 else math.inf
    j = int(np.searchsorted(v, target, side="left" if strict else "right"))
    if j == 0:
        return k[0] - (v[0] - target) / s[0] if s[0] > 0 else -math.inf
    return k[j - 1] + (target - v[j - 1]) / s[j]
