"""Per-trial structural checks run by the experiment runner on request.

Each check returns True (held), False (violated) or None (not applicable on
this trial).
"""

from __future__ import annotations

import numpy as np

from .. import oracle
from ..calib import CalibrationScores
from ..lossfn import LossContext
from ..select import MethodOutput, TieBreaker, competing_sets


def _tol(region) -> float:
    ivs = [v for iv in region.as_intervals() for v in iv if np.isfinite(v)] if not region.discrete else []
    scale = max((abs(v) for v in ivs), default=0.0)
    return 1e-9 * (1.0 + scale)


def _contained(small: MethodOutput | None, big: MethodOutput | None, unique: bool):
    if small is None or big is None or not unique:
        return None
    return small.region.issubset(big.region, tol=_tol(big.region))


def _sample_points(ctx: LossContext, outputs: dict, rng: np.random.Generator, count: int) -> np.ndarray:
    mc = ctx.model_class
    if mc.discrete:
        return np.arange(mc.n_labels)
    lo, hi = np.inf, -np.inf
    for out in outputs.values():
        if out.region.is_entire or out.region.is_empty:
            continue
        ivs = out.region.as_intervals()
        lo, hi = min(lo, ivs[0][0]), max(hi, ivs[-1][1])
    centers = mc.centers()
    lo, hi = min(lo, centers.min()), max(hi, centers.max())
    pad = 0.25 * (hi - lo) + 1.0
    return rng.uniform(lo - pad, hi + pad, size=count)


def check_trial_invariants(
    ctx: LossContext,
    cs: CalibrationScores,
    tb: TieBreaker,
    y_cal,
    outputs: dict,
    cfg,
    rng: np.random.Generator,
) -> dict:
    mc = ctx.model_class
    losses = ctx.loss_all(cs.q_hat())
    unique = int(np.count_nonzero(losses == losses.min())) == 1
    base = outputs.get("yk_baseline")
    checks = {
        "baseline_in_modsel": _contained(base, outputs.get("modsel_cp"), unique),
        "baseline_in_loo": _contained(base, outputs.get("modsel_cp_loo"), unique),
    }
    sets = competing_sets(ctx, cs, tb)

    ys = _sample_points(ctx, outputs, rng, cfg.invariant_samples)
    chosen = oracle.loo_selected_models(mc, y_cal, cs.alpha, tb, ys)  # (G, n)
    checks["loo_selection_in_M_i"] = bool(np.all(sets.M_i[np.arange(cs.n)[None, :], chosen]))

    checks["sandwich"] = None
    upper = outputs.get("modsel_cp")
    if not mc.discrete and upper is not None and not upper.region.is_entire and not upper.region.is_empty:
        ivs = upper.region.as_intervals()
        lo, hi = ivs[0][0], ivs[-1][1]
        pad = 0.2 * (hi - lo) + 1e-6
        grid = np.linspace(lo - pad, hi + pad, cfg.invariant_grid)
        exact = oracle.exact_modsel_cp_membership(mc, y_cal, cs.alpha, tb, grid)
        s = mc.test_scores(grid)
        lower = np.zeros(grid.size, dtype=bool)
        for lam in sets.members("M_minus"):
            lower |= oracle.direct_loss(mc, lam, s[lam]) < sets.threshold_T
        in_upper = upper.region.contains_many(grid)
        checks["sandwich"] = bool(np.all(~lower | exact) and np.all(~exact | in_upper))
    return checks
