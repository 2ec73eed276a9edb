import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modselcp.pwl import (
    PiecewiseLinearFn,
    pwl_clamp,
    pwl_compose_monotone,
    pwl_eval,
    pwl_identical,
    pwl_intersections,
    pwl_invert_monotone,
    tol_eq,
)

V = PiecewiseLinearFn.vee


def affine(slope, intercept):
    return PiecewiseLinearFn.linear(slope, intercept)


# -- construction -----------------------------------------------------------


def test_rejects_mismatched_slopes():
    with pytest.raises(ValueError):
        PiecewiseLinearFn(np.array([0.0, 1.0]), 0.0, np.array([1.0, 2.0]))


def test_rejects_unsorted_knots():
    with pytest.raises(ValueError):
        PiecewiseLinearFn(np.array([1.0, 0.0]), 0.0, np.array([0.0, 1.0, 2.0]))


def test_constant_needs_zero_slope():
    with pytest.raises(ValueError):
        PiecewiseLinearFn(np.empty(0), 1.0, np.array([1.0]))


def test_arrays_are_read_only():
    f = V(0.0)
    with pytest.raises(ValueError):
        f.knots[0] = 3.0


# -- evaluation --------------------------------------------------------------


def test_eval_absolute_value():
    assert pwl_eval(V(2.0), 5.0) == 3.0


def test_eval_constant():
    assert pwl_eval(PiecewiseLinearFn.constant(7.0), -10.0) == 7.0


def test_eval_clamped_absolute_value():
    assert pwl_eval(pwl_clamp(V(0.0), 0.5, 2.0), 1.0) == 1.0


def test_eval_vectorised_and_infinite():
    f = V(1.0)
    np.testing.assert_allclose(f(np.array([-1.0, 1.0, 4.0])), [2.0, 0.0, 3.0])
    assert f(math.inf) == math.inf and f(-math.inf) == math.inf
    g = pwl_clamp(f, 0.0, 2.0)
    assert g(math.inf) == 2.0


# -- clamp ---------------------------------------------------------------------


def test_clamp_hand_construction():
    g = pwl_clamp(V(0.0), 0.5, 2.0)
    ys = np.array([-5.0, -2.0, -1.0, -0.5, 0.0, 0.3, 0.5, 1.5, 2.0, 3.0])
    expected = np.clip(np.abs(ys), 0.5, 2.0)
    np.testing.assert_allclose(g(ys), expected)
    np.testing.assert_allclose(g.knots, [-2.0, -0.5, 0.0, 0.5, 2.0])


def test_clamp_unbounded_is_identity():
    f = V(0.0)
    assert pwl_clamp(f, -math.inf, math.inf) is f


def test_clamp_constant():
    g = pwl_clamp(PiecewiseLinearFn.constant(3.0), 0.0, 1.0)
    assert g.is_constant and g(0.0) == 1.0


def test_clamp_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        pwl_clamp(V(0.0), 2.0, 1.0)


# -- composition -----------------------------------------------------------------


def test_compose_width_loss_with_vee():
    g = pwl_compose_monotone(affine(2.0, 0.0), V(2.0))
    ys = np.linspace(-5, 9, 57)
    np.testing.assert_allclose(g(ys), 2 * np.abs(ys - 2.0))


def test_compose_identity():
    f = pwl_clamp(V(1.0), 0.5, 3.0)
    assert pwl_identical(pwl_compose_monotone(affine(1.0, 0.0), f), f)


def test_compose_shifted_hinge():
    # g(q) = max(0, 3 + 2q): flat below q = -1.5
    g = PiecewiseLinearFn(np.array([-1.5]), 0.0, np.array([0.0, 2.0]))
    h = pwl_compose_monotone(g, V(0.0))
    ys = np.linspace(-4, 4, 81)
    np.testing.assert_allclose(h(ys), 3 + 2 * np.abs(ys))


def test_compose_rejects_decreasing_outer():
    with pytest.raises(ValueError):
        pwl_compose_monotone(affine(-1.0, 0.0), V(0.0))


# -- intersections -----------------------------------------------------------------


def test_intersections_two_vees():
    assert pwl_intersections(V(0.0), V(2.0)) == [1.0]


def test_intersections_disjoint():
    f = V(0.0)
    g = PiecewiseLinearFn(np.array([0.0]), 1.0, np.array([-1.0, 1.0]))
    assert pwl_intersections(f, g) == []


def test_intersections_clamped_vees_with_shared_plateaus():
    f = pwl_clamp(V(0.0), 0.5, 2.0)
    g = pwl_clamp(V(1.5), 0.5, 2.0)
    # a crossing at 0.75, then both sit on the plateau 2 left of -2 and right of 3.5
    assert pwl_intersections(f, g) == pytest.approx([-2.0, 0.75, 3.5])


def test_intersections_identical_functions():
    f = pwl_clamp(V(0.0), 0.5, 2.0)
    assert pwl_intersections(f, f) == []
    assert pwl_identical(f, f)


def test_intersections_touching_without_crossing_is_ignored():
    # |y| and -|y| meet at 0 without changing sign of the difference
    f = V(0.0)
    g = PiecewiseLinearFn(np.array([0.0]), 0.0, np.array([1.0, -1.0]))
    assert pwl_intersections(f, g) == []


def test_intersections_interior_plateau_endpoints():
    f = pwl_clamp(V(0.0), 0.0, 1.0)  # 1 outside [-1, 1]
    g = PiecewiseLinearFn.constant(1.0)
    assert pwl_intersections(f, g) == [-1.0, 1.0]


# -- inversion ---------------------------------------------------------------------


def test_invert_linear():
    assert pwl_invert_monotone(affine(2.0, 0.0), 2.0) == pytest.approx(1.0)


def test_invert_two_hinges():
    # q -> (max(0, 2 + 2q) + max(0, 4 + 2q)) / 2 ; knots at -2 and -1
    g = PiecewiseLinearFn(np.array([-2.0, -1.0]), 0.0, np.array([0.0, 1.0, 2.0]))
    assert pwl_invert_monotone(g, 0.5) == pytest.approx(-1.5)


def test_invert_constant_below_target():
    assert pwl_invert_monotone(PiecewiseLinearFn.constant(0.0), 1.0) == math.inf
    assert pwl_invert_monotone(PiecewiseLinearFn.constant(2.0), 1.0) == -math.inf


def test_invert_plateau_strict_vs_weak():
    g = PiecewiseLinearFn(np.array([0.0, 1.0, 2.0]), 0.0, np.array([0.0, 1.0, 0.0, 1.0]))
    assert pwl_invert_monotone(g, 1.0) == pytest.approx(2.0)
    assert pwl_invert_monotone(g, 1.0, strict=True) == pytest.approx(1.0)


def test_invert_rejects_decreasing():
    with pytest.raises(ValueError):
        pwl_invert_monotone(affine(-1.0, 0.0), 0.0)


# -- properties ----------------------------------------------------------------------

coord = st.floats(-20, 20, allow_nan=False, allow_infinity=False)


@st.composite
def pwl_functions(draw, monotone=False, max_knots=6):
    k = draw(st.integers(0, max_knots))
    knots = sorted(set(round(v, 3) for v in draw(st.lists(coord, min_size=k, max_size=k))))
    if not knots:
        return PiecewiseLinearFn.constant(draw(coord))
    slope = st.floats(0, 3) if monotone else st.floats(-3, 3)
    slopes = [round(v, 3) for v in draw(st.lists(slope, min_size=len(knots) + 1, max_size=len(knots) + 1))]
    return PiecewiseLinearFn(np.array(knots), draw(coord), np.array(slopes))


@settings(max_examples=150, deadline=None)
@given(pwl_functions(), pwl_functions())
def test_intersections_match_grid_sign_scan(f, g):
    pts = pwl_intersections(f, g)
    tol = tol_eq(max(f.scale(), g.scale()))
    for p in pts:
        assert abs(f(p) - g(p)) <= 1e3 * tol
    lo = min([-50.0] + pts) - 1
    hi = max([50.0] + pts) + 1
    ys = np.linspace(lo, hi, 10_001)
    step = ys[1] - ys[0]
    h = f(ys) - g(ys)
    sgn = np.where(np.abs(h) <= 1e3 * tol, 0, np.sign(h))
    nz = np.flatnonzero(sgn)
    # every strict sign change on the grid is within one grid step of a reported point
    for a, b in zip(nz[:-1], nz[1:]):
        if sgn[a] != sgn[b]:
            assert pts, "sign change but no intersection reported"
            assert min(abs(p - ys[a]) for p in pts) <= (b - a) * step + step
            assert min(abs(p - ys[b]) for p in pts) <= (b - a) * step + step


@settings(max_examples=150, deadline=None)
@given(pwl_functions(monotone=True), coord)
def test_invert_round_trip(g, target):
    q = pwl_invert_monotone(g, target)
    if math.isfinite(q):
        assert g(q) <= target + tol_eq(max(g.scale(), abs(target)))
        # slightly beyond q the function exceeds the target (q is the supremum)
        assert g(q + 1e-6 * (1 + abs(q))) >= target - tol_eq(max(g.scale(), abs(target)))
    elif q == math.inf:
        assert g(1e6) <= target + 1e-6
    else:
        assert g(-1e6) > target - 1e-6


@settings(max_examples=100, deadline=None)
@given(pwl_functions(), coord, st.floats(0, 20))
def test_clamp_within_bounds(f, lo, width):
    hi = lo + width
    g = pwl_clamp(f, lo, hi)
    ys = np.random.default_rng(0).uniform(-100, 100, 1000)
    vals = g(ys)
    tol = tol_eq(max(abs(lo), abs(hi)))
    assert np.all(vals >= lo - tol) and np.all(vals <= hi + tol)
    np.testing.assert_allclose(vals, np.clip(f(ys), lo, hi), atol=1e-7 * (1 + f.scale()))


@settings(max_examples=100, deadline=None)
@given(pwl_functions(monotone=True), pwl_functions())
def test_compose_agrees_pointwise(g, f):
    h = pwl_compose_monotone(g, f)
    ys = np.random.default_rng(1).uniform(-60, 60, 500)
    np.testing.assert_allclose(h(ys), g(f(ys)), rtol=1e-9, atol=1e-7 * (1 + abs(g(f(ys))).max()))
