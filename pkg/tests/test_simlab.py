import math

import numpy as np
import pytest

from modselcp.simlab import dgp
from modselcp.simlab.pretrain import (
    LinearModels,
    pretrain_classifiers,
    pretrain_ridge_subset_models,
    pretrain_sigma_estimators,
    ridge_fit,
    two_model_class,
)
from modselcp.simlab.runner import (
    ExperimentConfig,
    InvariantViolation,
    _mean_se,
    run_experiment,
    run_trial,
    pretrain,
    worker_count,
)

# -- data-generating processes ---------------------------------------------------------


def test_sparse_coefficients():
    theta = dgp.RegressionLinear().coefficients()
    assert np.count_nonzero(theta) == 15
    np.testing.assert_array_equal(np.flatnonzero(theta) + 1, np.arange(20, 301, 20))


def test_dense_noise_variance():
    spec = dgp.RegressionLinear(d=50, theta="dense")
    X, y = dgp.gen_regression_data(spec, 200_000, 0)
    resid = y - X @ spec.coefficients()
    assert resid.var() == pytest.approx(1 / 50**2, rel=0.02)


def test_t_features_have_heavy_tails():
    spec = dgp.RegressionLinear(d=4, x_dist="t", noise="t")
    X, _ = dgp.gen_regression_data(spec, 200_000, 1)
    # a t_3 marginal has variance 3 and far more mass beyond 5 than a normal
    assert X[:, 0].var() == pytest.approx(3.0, rel=0.15)
    assert np.mean(np.abs(X[:, 0]) > 5) > 1e-3


def test_regression_is_deterministic_given_seed():
    spec = dgp.RegressionLinear(d=10)
    a, b = dgp.gen_regression_data(spec, 5, 3), dgp.gen_regression_data(spec, 5, 3)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_dgp_validation():
    with pytest.raises(ValueError):
        dgp.RegressionLinear(theta="medium")
    with pytest.raises(ValueError):
        dgp.TwoModel(C=0.0)
    with pytest.raises(ValueError):
        dgp.Classification(n_labels=1)
    with pytest.raises(ValueError):
        dgp.gen_two_model_data(dgp.TwoModel(), 0, 0)


def test_classification_design():
    spec = dgp.Classification()
    assert spec.n_labels == 10
    beta = spec.draw_beta(0)
    X, y = dgp.gen_classification_data(spec, 50_000, 1, beta)
    assert set(np.unique(X[:, 0])) == {1.0, -8.0}
    assert np.mean(X[:, 0] == 1.0) == pytest.approx(0.2, abs=0.01)
    np.testing.assert_allclose(dgp.class_weights(X[:100], beta).sum(axis=1), 1.0)
    assert y.min() >= 0 and y.max() <= 9


def test_classification_labels_follow_weights():
    spec = dgp.Classification(d=3, n_labels=3)
    beta = np.zeros((3, 3))
    beta[0, 1] = 50.0  # label 0 almost surely when x_2 > 0, otherwise split between 1 and 2
    X, y = dgp.gen_classification_data(spec, 20_000, 2, beta)
    pos = X[:, 1] > 0.2
    assert np.mean(y[pos] == 0) > 0.99
    assert np.mean(y[X[:, 1] < -0.2] == 1) == pytest.approx(0.5, abs=0.03)


def test_two_model_data():
    X, y = dgp.gen_two_model_data(dgp.TwoModel(C=5, mu=1.0), 100_000, 0)
    assert X.shape == (100_000, 1)
    eps = y - X[:, 0]
    assert eps.mean() == pytest.approx(1.0, abs=0.02) and eps.std() == pytest.approx(1.0, abs=0.02)


# -- pretraining ---------------------------------------------------------------------------


def test_ridge_scalar_formula():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 1))
    y = 2 * x[:, 0] + rng.normal(size=30)
    theta = ridge_fit(x, y, 0.1)
    assert theta[0] == pytest.approx(np.sum(x[:, 0] * y) / (np.sum(x[:, 0] ** 2) + 0.1))
    models = pretrain_ridge_subset_models(x, y, 3, subset_frac=0.1, penalty=0.1, seed=0)
    np.testing.assert_allclose(models.theta[0], theta[0])


def test_ridge_heavy_shrinkage_gives_zero_predictor():
    X, y = dgp.gen_regression_data(dgp.RegressionLinear(d=40), 60, 0)
    models = pretrain_ridge_subset_models(X, y, 4, penalty=1e12, seed=0)
    assert np.abs(models.predict(X)).max() < 1e-6
    with pytest.raises(ValueError):
        ridge_fit(X, y, 0.0)


def test_ridge_subsets_differ_and_have_expected_size():
    X, y = dgp.gen_regression_data(dgp.RegressionLinear(), 300, 0)
    models = pretrain_ridge_subset_models(X, y, 10, seed=1)
    supports = [frozenset(np.flatnonzero(models.theta[:, l])) for l in range(10)]
    assert all(len(s) == 30 for s in supports)
    assert len(set(supports)) == 10


def test_sigma_estimators():
    X = np.random.default_rng(0).normal(size=(40, 3))
    base = LinearModels(np.zeros((3, 2)))
    const = pretrain_sigma_estimators(X, np.full(40, 2.0), base, k=5)
    np.testing.assert_allclose(const.sigma(X[:7]), 2.0)
    y = np.random.default_rng(1).normal(size=40)
    everyone = pretrain_sigma_estimators(X, y, base, k=40)
    np.testing.assert_allclose(everyone.sigma(X[:3]), np.mean(np.abs(y)))
    zero = pretrain_sigma_estimators(X, np.zeros(40), base, k=3)
    assert np.all(zero.sigma(X) > 0)
    with pytest.raises(ValueError):
        pretrain_sigma_estimators(X, y, base, k=41)


def test_two_model_class_scores():
    models = two_model_class(5.0)
    X = np.array([[0.0], [1.0]])
    mc = models.model_class(X, np.array([2.0]))
    y = np.array([4.0, -3.0])
    np.testing.assert_allclose(mc.calib_scores(y)[0], np.abs(y - X[:, 0] - 5.0))
    np.testing.assert_allclose(mc.calib_scores(y)[1], np.abs(y - X[:, 0] + 5.0))
    with pytest.raises(ValueError):
        two_model_class(-1.0)


def test_two_model_residual_is_standard_normal_when_mu_equals_c():
    X, y = dgp.gen_two_model_data(dgp.TwoModel(C=2.0, mu=2.0), 100_000, 5)
    r = y - X[:, 0] - 2.0
    assert r.mean() == pytest.approx(0.0, abs=0.02) and r.std() == pytest.approx(1.0, abs=0.02)


def test_classifiers():
    spec = dgp.Classification(d=10, n_labels=4)
    beta = spec.draw_beta(0)
    X, y = dgp.gen_classification_data(spec, 200, 1, beta)
    models = pretrain_classifiers(X, y, 3, 4, seed=2, steps=100)
    p = models.probs(X[:20])
    assert p.shape == (3, 20, 4)
    np.testing.assert_allclose(p.sum(axis=2), 1.0)
    assert not np.allclose(p[0], p[1])
    untrained = pretrain_classifiers(X, y, 1, 4, seed=2, steps=0)
    assert np.abs(untrained.probs(X[:20]) - 0.25).max() < 0.1


# -- runner ------------------------------------------------------------------------------------


def small_two_model(**kw):
    return ExperimentConfig(dgp.TwoModel(C=5, mu=0), n=50, trials=kw.pop("trials", 30), **kw)


def test_config_validation_and_forced_fields():
    cfg = small_two_model(n_models=9, score="rescaled")
    assert cfg.n_models == 2 and cfg.score == "residual"
    assert ExperimentConfig(dgp.Classification(), trials=1).score == "density"
    for bad in (dict(trials=0), dict(alpha=1.0), dict(methods=("magic",)), dict(tie_break="coin")):
        with pytest.raises(ValueError):
            ExperimentConfig(dgp.TwoModel(), **bad)
    with pytest.raises(ValueError):
        ExperimentConfig(dgp.RegressionLinear(), score="cqr")


def test_mean_se():
    assert _mean_se([1, 0, 1, 0]) == (0.5, pytest.approx(math.sqrt(1 / 3 / 4)))
    mean, se = _mean_se([2.0])
    assert mean == 2.0 and math.isnan(se)
    assert _mean_se([1.0, math.inf]) == (math.inf, math.inf)


def test_worker_count(monkeypatch):
    monkeypatch.delenv("MODSEL_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("MODSEL_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MODSEL_THREADS", "lots")
    assert worker_count() == 1


def test_experiment_is_reproducible_and_worker_independent():
    cfg = small_two_model()
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=1)
    c = run_experiment(cfg, workers=3)
    assert a.rows == b.rows == c.rows
    assert a.best_single_width == c.best_single_width


def test_different_seed_changes_results():
    a = run_experiment(small_two_model(master_seed=1))
    b = run_experiment(small_two_model(master_seed=2))
    assert a.rows != b.rows


def test_single_trial_summary():
    s = run_experiment(small_two_model(trials=1))
    assert len(s.rows) == 6
    for r in s.rows:
        assert math.isnan(r.coverage_se) and r.coverage in (0.0, 1.0)


def test_summary_fields():
    s = run_experiment(small_two_model(trials=40), keep_records=True)
    assert len(s.records) == 40
    for r in s.rows:
        assert 0.0 <= r.coverage <= 1.0
        if math.isfinite(r.width):
            assert r.width_ratio == pytest.approx(r.width / s.best_single_width)
    # the best single model's mean width is attained by one of the two fixed models
    single = np.array([rec.single_widths for rec in s.records]).mean(axis=0)
    assert s.best_single_width == pytest.approx(single.min())


def test_invariant_checks_run_on_each_trial():
    s = run_experiment(small_two_model(trials=10, check_invariants=True))
    for key in ("baseline_in_modsel", "baseline_in_loo", "loo_selection_in_M_i", "sandwich"):
        applicable, held = s.checks[key]
        assert applicable > 0 and held == applicable


def test_invariant_violation_is_raised(monkeypatch):
    from modselcp.simlab import runner

    monkeypatch.setattr(runner, "check_trial_invariants", lambda *a, **k: {"fake": False})
    cfg = small_two_model(trials=1, check_invariants=True)
    models, state = pretrain(cfg)
    with pytest.raises(InvariantViolation):
        run_trial(cfg, models, state, 0)


def test_regression_and_classification_smoke():
    reg = ExperimentConfig(dgp.RegressionLinear(d=30), n=20, n_models=4, n_train=60, trials=5, score="rescaled", knn_k=5)
    s = run_experiment(reg)
    assert {r.method for r in s.rows} == set(reg.methods)
    cls = ExperimentConfig(dgp.Classification(d=8, n_labels=4), n=20, n_models=3, n_train=80, trials=5)
    s = run_experiment(cls)
    assert all(r.width <= 4 for r in s.rows)


@pytest.mark.slow
def test_two_model_shifted_noise_baseline_width():
    # C = 5, mu = 1: the shifted-noise scenario of the two-model simulation table
    s = run_experiment(ExperimentConfig(dgp.TwoModel(C=5.0, mu=1.0), n=200, alpha=0.1, trials=5000, methods=("yk_baseline",)))
    assert s.row("yk_baseline").width == pytest.approx(10.586, abs=0.15)
