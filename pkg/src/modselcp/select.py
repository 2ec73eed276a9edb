"""Prediction-set methods built on a finite class of pretrained models.

Methods
-------
split_conformal
    One fixed model, calibrated at level (1 - alpha)(1 + 1/n).
yk_baseline
    Pick the model whose calibrated set is smallest and reuse the same
    calibration data for its threshold (no correction for the selection).
yk_adjust
    ``yk_baseline`` run at a deflated level computed by :func:`adjusted_alpha`.
yk_split
    Select on the first half of the calibration data, calibrate on the second.
modsel_cp / modsel_cp_discrete
    Symmetric selection in which the hypothesised test response takes part in
    the selection. For real responses the returned set is the
    competing-model upper bound (it differs from the exact set on a null set
    for continuous data); for label spaces it is computed exactly.
modsel_cp_loo / modsel_cp_loo_discrete
    Leave-one-out variant: each calibration score is re-evaluated under the
    model selected without that point. For real responses the response line is
    cut into cells on which every leave-one-out selection is constant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .calib import CalibrationScores, order_stat
from .lossfn import LossContext
from .pwl import pwl_clamp, pwl_compose_monotone, pwl_eval, pwl_intersections
from .regions import PredictionRegion, union_all

METHODS = ("split", "yk_baseline", "yk_adjust", "yk_split", "modsel_cp", "modsel_cp_loo")


# ---------------------------------------------------------------------------
# tie-breaking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TieBreaker:
    """Resolve argmin ties among models.

    ``TieBreaker()`` always takes the smallest model index. ``TieBreaker(seed)``
    draws one ``xi ~ Uniform[0, 1)`` at construction and picks element
    ``floor(xi * |ties|)`` of the sorted tie set, so every selection made with
    the same object uses the same draw.
    """

    seed: int | None = None
    xi: float = field(init=False)

    def __post_init__(self):
        xi = 0.0 if self.seed is None else float(np.random.default_rng(self.seed).random())
        object.__setattr__(self, "xi", xi)

    @classmethod
    def min_index(cls) -> "TieBreaker":
        return cls()

    @classmethod
    def seeded(cls, seed: int) -> "TieBreaker":
        return cls(int(seed))

    @classmethod
    def parse(cls, text: str) -> "TieBreaker":
        """Parse ``"min_index"`` or ``"seeded:<u64>"``."""
        text = text.strip()
        if text == "min_index":
            return cls()
        if text.startswith("seeded:"):
            seed = int(text.split(":", 1)[1])
            if not 0 <= seed < 2**64:
                raise ValueError("seed must be an unsigned 64-bit integer")
            return cls(seed)
        raise ValueError(f"unknown tie-break rule {text!r}")

    def __str__(self) -> str:
        return "min_index" if self.seed is None else f"seeded:{self.seed}"

    def pick(self, tied: np.ndarray) -> int:
        """Choose from a sorted, nonempty array of tied indices."""
        return int(tied[int(math.floor(self.xi * tied.size))])

    def argmin(self, values) -> int:
        """Index of the minimum of a 1-d array, ties resolved by this rule."""
        values = np.asarray(values)
        tied = np.flatnonzero(values == values.min())
        return self.pick(tied)

    def argmin_rows(self, values) -> np.ndarray:
        """Row-wise tie-resolved argmin of a 2-d array (column positions)."""
        values = np.asarray(values)
        mask = values == values.min(axis=1, keepdims=True)
        if self.xi == 0.0:
            return mask.argmax(axis=1)
        counts = mask.sum(axis=1)
        want = np.floor(self.xi * counts).astype(int) + 1
        hit = mask & (np.cumsum(mask, axis=1) == want[:, None])
        return hit.argmax(axis=1)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodOutput:
    """Region returned by a method plus bookkeeping.

    ``threshold_T`` is the loss budget of the selected model,
    ``L(lam_hat, q_hat(lam_hat))`` (for ``split``: of the fixed model).
    """

    region: PredictionRegion
    selected_model: int
    threshold_T: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.region.measure()


@dataclass(frozen=True)
class CompetingSets:
    """Models that can be selected once the test point enters the selection.

    ``M`` / ``M_minus`` are boolean masks over models; ``M_i`` is an
    ``(n, n_models)`` boolean matrix whose row i is the candidate set for the
    leave-i-out selection. ``l_i`` and ``u_i`` are the ``(n_models, n)``
    bounds defining it.
    """

    M: np.ndarray
    M_minus: np.ndarray
    M_i: np.ndarray
    l_i: np.ndarray
    u_i: np.ndarray
    threshold_T: float
    lam_hat: int

    def members(self, which: str = "M") -> list[int]:
        return np.flatnonzero(getattr(self, which)).tolist()

    def members_i(self, i: int) -> list[int]:
        return np.flatnonzero(self.M_i[i]).tolist()


def _entire(ctx: LossContext) -> PredictionRegion:
    return PredictionRegion.entire(ctx.model_class.n_labels)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def selection_losses(ctx: LossContext, cs: CalibrationScores) -> np.ndarray:
    """L(lam, q_hat(lam)) for every model."""
    return ctx.loss_all(cs.q_hat())


def select_lambda_hat(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> int:
    """Model with the smallest calibrated loss."""
    return tb.argmin(selection_losses(ctx, cs))


def split_conformal(ctx: LossContext, cs: CalibrationScores, lam: int = 0) -> MethodOutput:
    """Split conformal set of one fixed model."""
    q = cs.q_hat(lam)
    region = ctx.model_class.region(lam, q)
    return MethodOutput(region, int(lam), ctx.loss(int(lam), q), {"q_hat": q})


def yk_baseline(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    losses = selection_losses(ctx, cs)
    lam = tb.argmin(losses)
    q = cs.q_hat(lam)
    return MethodOutput(ctx.model_class.region(lam, q), lam, float(losses[lam]), {"q_hat": q})


def adjusted_alpha(alpha: float, n: int, n_models: int) -> float:
    """Deflated miscoverage level that restores validity for ``yk_baseline``.

    alpha - (sqrt(log(2|L|) / 2) + 1/3 - (1 - alpha)/sqrt(n)) / (sqrt(n) (1 + 1/n))
    """
    num = math.sqrt(0.5 * math.log(2 * n_models)) + 1.0 / 3.0 - (1.0 - alpha) / math.sqrt(n)
    return alpha - num / (math.sqrt(n) * (1.0 + 1.0 / n))


def yk_adjust(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    a = adjusted_alpha(cs.alpha, cs.n, ctx.n_models)
    if a <= 0:
        return MethodOutput(_entire(ctx), select_lambda_hat(ctx, cs, tb), math.inf, {"alpha_tilde": a})
    out = yk_baseline(ctx, cs.with_alpha(a), tb)
    return MethodOutput(out.region, out.selected_model, out.threshold_T, {**out.diagnostics, "alpha_tilde": a})


def yk_split(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker, n1: int | None = None) -> MethodOutput:
    """Select on points ``0..n1-1`` (default ``n // 2``), calibrate on the rest."""
    n = cs.n
    n1 = n // 2 if n1 is None else int(n1)
    if not 1 <= n1 < n:
        raise ValueError(f"need 1 <= n1 < n, got n1={n1}, n={n}")
    first, second = np.arange(n1), np.arange(n1, n)
    ctx1 = LossContext(ctx.model_class, calib_idx=first, include_test=False)
    cs1, cs2 = cs.subset_points(first), cs.subset_points(second)
    losses = ctx1.loss_all(cs1.q_hat())
    lam = tb.argmin(losses)
    q2 = cs2.q_hat(lam)
    return MethodOutput(
        ctx.model_class.region(lam, q2), lam, float(losses[lam]), {"q_hat": q2, "n1": n1}
    )


# ---------------------------------------------------------------------------
# competing sets
# ---------------------------------------------------------------------------


def competing_sets(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> CompetingSets:
    l_hat = selection_losses(ctx, cs)
    lam_hat = tb.argmin(l_hat)
    T = float(l_hat[lam_hat])
    l_minus = ctx.loss_all(cs.q_hat_minus())
    l_plus = ctx.loss_all(cs.q_hat_plus())
    l_cal = ctx.loss_all(cs.scores)
    lh = l_hat[:, None]
    lower = np.where(l_cal < lh, lh, l_minus[:, None])
    upper = np.where(l_cal <= lh, l_plus[:, None], lh)
    M_i = (lower <= upper.min(axis=0, keepdims=True)).T
    return CompetingSets(
        M=l_minus <= T,
        M_minus=l_minus < T,
        M_i=M_i,
        l_i=lower,
        u_i=upper,
        threshold_T=T,
        lam_hat=lam_hat,
    )


# ---------------------------------------------------------------------------
# ModSel-CP
# ---------------------------------------------------------------------------


def modsel_cp_bounds(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker, sets: CompetingSets | None = None):
    """(upper, lower) regions sandwiching the exact set for real responses.

    The upper bound is the union over competing models of
    ``{y : L(lam, S(y)) <= T}``; the lower bound uses the strictly competing
    models and a strict inequality (returned as the closure of an open set).
    """
    sets = competing_sets(ctx, cs, tb) if sets is None else sets
    T = sets.threshold_T
    if T == math.inf:
        return _entire(ctx), _entire(ctx)
    mc = ctx.model_class
    upper = union_all(mc.region(l, ctx.invert_loss(l, T)) for l in sets.members("M"))
    lower = union_all(mc.region(l, ctx.invert_loss(l, T, strict=True)) for l in sets.members("M_minus"))
    return upper, lower


def modsel_cp(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    if ctx.discrete:
        return modsel_cp_discrete(ctx, cs, tb)
    sets = competing_sets(ctx, cs, tb)
    upper, lower = modsel_cp_bounds(ctx, cs, tb, sets)
    diag = {
        "M": int(sets.M.sum()),
        "M_minus": int(sets.M_minus.sum()),
        "lower": lower,
        "degenerate": sets.threshold_T == math.inf,
    }
    return MethodOutput(upper, sets.lam_hat, sets.threshold_T, diag)


def modsel_cp_discrete(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    """Exact set over a finite label space by enumerating the labels."""
    if not ctx.discrete:
        raise ValueError("modsel_cp_discrete needs a label-space model class")
    mc = ctx.model_class
    sets = competing_sets(ctx, cs, tb)
    s = mc.test_scores(None)  # (models, K)
    q_aug = cs.q_hat_aug_all(s)
    lam_y = tb.argmin_rows(ctx.loss_all(q_aug).T)  # (K,)
    labels = np.arange(mc.n_labels)
    keep = s[lam_y, labels] <= q_aug[lam_y, labels]
    region = PredictionRegion.from_labels(labels[keep], mc.n_labels)
    diag = {"M": int(sets.M.sum()), "M_minus": int(sets.M_minus.sum()), "selected_per_label": lam_y.tolist()}
    return MethodOutput(region, sets.lam_hat, sets.threshold_T, diag)


# ---------------------------------------------------------------------------
# ModSel-CP-LOO
# ---------------------------------------------------------------------------


class _LooColumns:
    """Leave-one-out loss profiles, one per (model, position-relative-to-k) pair.

    For fixed model ``lam`` the leave-i-out quantile is the test-score profile
    clamped to one of three intervals depending only on whether point i ranks
    above, at, or below rank k. The loss of that quantile is the loss profile
    composed with the clamp.
    """

    def __init__(self, ctx: LossContext, cs: CalibrationScores, sets: CompetingSets):
        mc = ctx.model_class
        self.case = cs.loo_case()  # (models, n)
        qm, q, qp = cs.q_hat_minus(), cs.q_hat(), cs.q_hat_plus()
        bounds = ((qm, q), (qm, qp), (q, qp))
        self.index: dict[tuple[int, int], int] = {}
        self.clamps = []
        self.fns = []
        # column ids of each point's candidate models, in model order
        self.cols_of_point = []
        for i in range(cs.n):
            cols = []
            for lam in np.flatnonzero(sets.M_i[i]):
                key = (int(lam), int(self.case[lam, i]))
                if key not in self.index:
                    lo, hi = bounds[key[1]]
                    clamp = pwl_clamp(mc.test_profile(key[0]), float(lo[key[0]]), float(hi[key[0]]))
                    self.index[key] = len(self.fns)
                    self.clamps.append(clamp)
                    self.fns.append(pwl_compose_monotone(ctx.loss_profile(key[0]), clamp))
                cols.append(self.index[key])
            self.cols_of_point.append(tuple(cols))
        self.models = np.array([k[0] for k in self.index], dtype=int)


def loo_breakpoints(ctx: LossContext, cs: CalibrationScores, sets: CompetingSets, _cols: _LooColumns | None = None) -> list[float]:
    """Points where some leave-one-out selection may change.

    Union over i of the crossings between the leave-i-out losses of every pair
    of candidate models, plus every knot of every clamped test-score profile.
    """
    if ctx.discrete:
        raise ValueError("breakpoints are only defined for real responses")
    cols = _LooColumns(ctx, cs, sets) if _cols is None else _cols
    pairs = set()
    for group in set(cols.cols_of_point):
        pairs.update(itertools.combinations(sorted(group), 2))
    points = set()
    for clamp in cols.clamps:
        points.update(clamp.knots.tolist())
    for a, b in pairs:
        points.update(pwl_intersections(cols.fns[a], cols.fns[b]))
    return sorted(p for p in points if math.isfinite(p))


def _cell_representatives(breaks: np.ndarray, center: float) -> np.ndarray:
    if breaks.size == 0:
        return np.array([center])
    pad = 1.0 + (breaks[-1] - breaks[0])
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    return np.concatenate(([breaks[0] - pad], mids, [breaks[-1] + pad]))


def modsel_cp_loo(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    if ctx.discrete:
        return modsel_cp_loo_discrete(ctx, cs, tb)
    mc = ctx.model_class
    sets = competing_sets(ctx, cs, tb)
    lam_hat, T = sets.lam_hat, sets.threshold_T
    if T == math.inf:
        return MethodOutput(_entire(ctx), lam_hat, T, {"degenerate": True})
    cols = _LooColumns(ctx, cs, sets)
    breaks = np.asarray(loo_breakpoints(ctx, cs, sets, cols))
    reps = _cell_representatives(breaks, float(mc.centers()[lam_hat]))
    values = np.column_stack([pwl_eval(f, reps) for f in cols.fns])  # (cells, columns)

    l_cal = ctx.loss_all(cs.scores)  # (models, n)
    chosen = np.empty((cs.n, reps.size), dtype=int)
    by_group: dict[tuple, list[int]] = {}
    for i, group in enumerate(cols.cols_of_point):
        by_group.setdefault(group, []).append(i)
    for group, points in by_group.items():
        g = np.asarray(group)
        pos = tb.argmin_rows(values[:, g])
        chosen[points, :] = cols.models[g[pos]][None, :]
    loo_losses = np.sort(l_cal[chosen, np.arange(cs.n)[:, None]], axis=0)
    budget = order_stat(loo_losses, cs.k, axis=0)  # (cells,)

    edges = np.concatenate(([-math.inf], breaks, [math.inf]))
    pieces = []
    thresholds = {}
    for j, b in enumerate(np.asarray(budget, dtype=float).reshape(-1)):
        if b not in thresholds:
            thresholds[b] = mc.region(lam_hat, ctx.invert_loss(lam_hat, b))
        region = thresholds[b]
        if region.is_entire:
            pieces.append((edges[j], edges[j + 1]))
        elif not region.is_empty:
            pieces.extend(region.clip(edges[j], edges[j + 1]).as_intervals())
    diag = {
        "M": int(sets.M.sum()),
        "M_i_max": int(sets.M_i.sum(axis=1).max()),
        "breakpoints": int(breaks.size),
    }
    return MethodOutput(PredictionRegion.from_intervals(pieces), lam_hat, T, diag)


def loo_selections_discrete(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> np.ndarray:
    """Leave-i-out selected model for every label y: a (K, n) integer array."""
    s = ctx.model_class.test_scores(None)  # (models, K)
    lo, hi = cs.loo_bounds()  # (models, n)
    q = np.clip(s.T[:, :, None], lo[None], hi[None])  # (K, models, n)
    losses = ctx.loss_all(q.transpose(1, 0, 2))  # (models, K, n)
    n_models, K, n = losses.shape
    flat = losses.transpose(1, 2, 0).reshape(K * n, n_models)
    return tb.argmin_rows(flat).reshape(K, n)


def modsel_cp_loo_discrete(ctx: LossContext, cs: CalibrationScores, tb: TieBreaker) -> MethodOutput:
    """Exact leave-one-out set over a finite label space."""
    if not ctx.discrete:
        raise ValueError("modsel_cp_loo_discrete needs a label-space model class")
    mc = ctx.model_class
    sets = competing_sets(ctx, cs, tb)
    lam_hat = sets.lam_hat
    chosen = loo_selections_discrete(ctx, cs, tb)  # (K, n)
    l_cal = ctx.loss_all(cs.scores)
    loo_losses = np.sort(l_cal[chosen, np.arange(cs.n)[None, :]], axis=1)
    budget = order_stat(loo_losses, cs.k, axis=1)  # (K,)
    s_hat = mc.test_scores(None)[lam_hat]
    keep = ctx.loss(lam_hat, s_hat) <= budget
    region = PredictionRegion.from_labels(np.flatnonzero(keep), mc.n_labels)
    return MethodOutput(region, lam_hat, sets.threshold_T, {"M": int(sets.M.sum())})


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def run_method(name: str, ctx: LossContext, cs: CalibrationScores, tb: TieBreaker, **options) -> MethodOutput:
    """Run a method by name (see ``METHODS``)."""
    if name == "split":
        return split_conformal(ctx, cs, options.get("lam", 0))
    if name == "yk_baseline":
        return yk_baseline(ctx, cs, tb)
    if name == "yk_adjust":
        return yk_adjust(ctx, cs, tb)
    if name == "yk_split":
        return yk_split(ctx, cs, tb, options.get("n1"))
    if name == "modsel_cp":
        return modsel_cp(ctx, cs, tb)
    if name == "modsel_cp_loo":
        return modsel_cp_loo(ctx, cs, tb)
    raise ValueError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")
