import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import clip_to, continuous_instance, discrete_instance
from modselcp import oracle
from modselcp.calib import CalibrationScores
from modselcp.lossfn import LossContext
from modselcp.regions import PredictionRegion
from modselcp.scores import ModelClass
from modselcp.select import TieBreaker, modsel_cp, modsel_cp_loo, split_conformal

Y3 = np.array([0.5, 1.0, 2.0])
MIN = TieBreaker()
HAND_GRID = oracle.GridSpec(-4.0, 6.0, 10_001)  # step 1e-3


def constant_models(*values, n=3):
    v = np.asarray(values, dtype=float)
    return ModelClass.residual(np.repeat(v[:, None], n, axis=1), v)


def setup(mc, y, alpha):
    return LossContext(mc), CalibrationScores(mc.calib_scores(y), alpha)


def test_grid_spec():
    g = oracle.GridSpec(0.0, 1.0, 11)
    assert g.step == pytest.approx(0.1)
    assert g.points()[-1] == 1.0
    for bad in ((1.0, 0.0, 11), (0.0, math.inf, 11), (0.0, 1.0, 1)):
        with pytest.raises(ValueError):
            oracle.GridSpec(*bad)


def test_kth_smallest():
    v = np.array([[3.0, 1.0, 2.0]])
    assert oracle.kth_smallest(v, 2, axis=1)[0] == 2.0
    assert oracle.kth_smallest(v, 0, axis=1)[0] == -math.inf
    assert oracle.kth_smallest(v, 4, axis=1)[0] == math.inf


def test_direct_loss_is_mean_set_size():
    mc = ModelClass.rescaled([[0.0, 0.0]], [0.0], [[1.0, 2.0]], [3.0])
    assert oracle.direct_loss(mc, 0, 1.0) == pytest.approx(4.0)


def test_grid_single_model_matches_split():
    ctx, cs = setup(constant_models(0.0), Y3, 0.5)
    got = oracle.grid_modsel_cp(ctx, cs, MIN, Y3, HAND_GRID)
    assert oracle.region_diff_measure(got, split_conformal(ctx, cs).region) <= HAND_GRID.step
    got = oracle.grid_modsel_cp_loo(ctx, cs, MIN, Y3, HAND_GRID)
    assert oracle.region_diff_measure(got, split_conformal(ctx, cs).region) <= HAND_GRID.step


def test_grid_hand_case():
    ctx, cs = setup(constant_models(0.0, 1.5), Y3, 0.5)
    got = oracle.grid_modsel_cp(ctx, cs, MIN, Y3, HAND_GRID)
    expected = PredictionRegion.from_intervals([(-0.5, 0.5), (1.0, 2.0)])
    assert oracle.region_diff_measure(got, expected) <= 2e-3
    loo = oracle.grid_modsel_cp_loo(ctx, cs, MIN, Y3, HAND_GRID)
    exact = modsel_cp_loo(ctx, cs, MIN).region
    # each accepted run of grid points is widened by half a step at both ends
    tol = HAND_GRID.step * len(exact.as_intervals()) * (1 + 1e-9)
    assert oracle.region_diff_measure(loo, exact) <= tol


def test_grid_far_model_case():
    ctx, cs = setup(constant_models(0.0, 10.0), Y3, 0.5)
    got = oracle.grid_modsel_cp(ctx, cs, MIN, Y3, HAND_GRID)
    assert oracle.region_diff_measure(got, PredictionRegion.from_intervals([(-1.0, 1.0)])) <= 2e-3


def test_grid_duplicated_models_match_single():
    ctx1, cs1 = setup(constant_models(0.0), Y3, 0.5)
    ctx2, cs2 = setup(constant_models(0.0, 0.0), Y3, 0.5)
    a = oracle.grid_modsel_cp_loo(ctx1, cs1, MIN, Y3, HAND_GRID)
    b = oracle.grid_modsel_cp_loo(ctx2, cs2, MIN, Y3, HAND_GRID)
    assert a == b


def test_region_diff_examples():
    a = PredictionRegion.from_intervals([(0.0, 1.0)])
    assert oracle.region_diff_measure(a, a) == 0.0
    assert oracle.region_diff_measure(a, PredictionRegion.from_intervals([(0.0, 2.0)])) == 1.0
    assert oracle.region_diff_measure(PredictionRegion.from_labels([0, 1], 3), PredictionRegion.from_labels([1, 2], 3)) == 2.0


def test_default_grid_covers_method_output():
    rng = np.random.default_rng(9)
    for family in ("residual", "rescaled", "cqr"):
        inst = continuous_instance(rng, family)
        g = oracle.default_grid(inst.ctx, inst.cs, 1001)
        for fn in (modsel_cp, modsel_cp_loo):
            region = fn(inst.ctx, inst.cs, MIN).region
            if region.is_entire or region.is_empty:
                continue
            ivs = region.as_intervals()
            assert g.lo < ivs[0][0] and ivs[-1][1] < g.hi


# -- properties --------------------------------------------------------------------------

families = st.sampled_from(["residual", "rescaled", "cqr"])
seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(families, seeds)
def test_grid_matches_fast_methods(family, seed):
    inst = continuous_instance(np.random.default_rng(seed), family, max_n=15, max_models=4)
    ctx, cs = inst.ctx, inst.cs
    g = oracle.default_grid(ctx, cs, 2001)
    a = clip_to(modsel_cp(ctx, cs, MIN).region, g.lo, g.hi)
    b = oracle.grid_modsel_cp(ctx, cs, MIN, inst.y_cal, g)
    assert oracle.region_diff_measure(a, b) <= 5 * g.step
    c = clip_to(modsel_cp_loo(ctx, cs, MIN).region, g.lo, g.hi)
    d = oracle.grid_modsel_cp_loo(ctx, cs, MIN, inst.y_cal, g)
    assert oracle.region_diff_measure(c, d) <= 5 * g.step


@settings(max_examples=20, deadline=None)
@given(families, seeds)
def test_grid_refinement_is_stable(family, seed):
    inst = continuous_instance(np.random.default_rng(seed), family, max_n=15, max_models=4)
    ctx, cs = inst.ctx, inst.cs
    coarse = oracle.default_grid(ctx, cs, 1001)
    fine = oracle.GridSpec(coarse.lo, coarse.hi, 2001)
    a = oracle.grid_modsel_cp(ctx, cs, MIN, inst.y_cal, coarse)
    b = oracle.grid_modsel_cp(ctx, cs, MIN, inst.y_cal, fine)
    pieces = max(1, len(a.as_intervals()) if not a.is_empty else 1)
    assert abs(a.measure() - b.measure()) <= 4 * coarse.step * pieces


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_oracle_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    inst = discrete_instance(rng)
    perm = rng.permutation(inst.mc.n)
    mc2, y2 = inst.mc.subset_points(perm), inst.y_cal[perm]
    assert oracle.enum_modsel_cp(inst.mc, inst.y_cal, inst.alpha, inst.tb) == oracle.enum_modsel_cp(mc2, y2, inst.alpha, inst.tb)
    assert oracle.enum_modsel_cp_loo(inst.mc, inst.y_cal, inst.alpha, inst.tb) == oracle.enum_modsel_cp_loo(
        mc2, y2, inst.alpha, inst.tb
    )
