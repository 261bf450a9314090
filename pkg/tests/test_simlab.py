import math

import numpy as np
import pytest

from panelbc.panel import BINARY
from panelbc.simlab import (
    CHI2_2_95,
    DgpConfig,
    EstimatorSpec,
    generate,
    parse_estimator,
    replication_rng,
    run_monte_carlo,
    run_replications,
    summarize,
    wald_test,
)


def test_balanced_generate_shape():
    p, truth = generate(DgpConfig(N=30, T=6, seed=1))
    assert p.n_obs == 180 and p.n_indiv == 30 and p.n_time == 6
    assert set(np.unique(p.y)) <= {0.0, 1.0}
    assert p.regressor_kinds[0] == BINARY
    np.testing.assert_array_equal(truth.coef, [0.5, 1.0])
    assert truth.effects.shape == (180, 2)
    np.testing.assert_allclose(truth.ape, truth.effects.mean(axis=0))


def test_lag_column_is_previous_outcome():
    p, _ = generate(DgpConfig(N=20, T=5, seed=2))
    lag = p.lag_map
    ok = lag >= 0
    np.testing.assert_array_equal(p.X[ok, 0], p.y[lag[ok]])


@pytest.mark.parametrize("pattern", ["pattern1", "pattern2"])
def test_unbalanced_spans(pattern):
    cfg = DgpConfig(pattern=pattern, N1=12, N2=8, T1=4, T2=9, seed=3)
    p, _ = generate(cfg)
    counts = np.sort(p.indiv_counts)
    assert np.sum(counts == 4) == 12 and np.sum(counts == 9) == 8
    assert p.n_obs == 12 * 4 + 8 * 9
    assert cfg.mean_span == pytest.approx((12 * 4 + 8 * 9) / 20)
    assert cfg.mean_count == pytest.approx((12 * 4 + 8 * 9) / 9)


def test_mean_span_of_standard_design():
    cfg = DgpConfig(pattern="pattern1", N1=150, N2=150, T1=10, T2=30)
    assert cfg.mean_span == 20.0
    assert DgpConfig(pattern="pattern1", N1=300, N2=100, T1=10, T2=30).mean_span == 15.0


def test_invalid_designs():
    with pytest.raises(ValueError):
        DgpConfig(kind="other")
    with pytest.raises(ValueError):
        DgpConfig(N=10, T=1)
    with pytest.raises(ValueError):
        DgpConfig(pattern="pattern1", N1=5, N2=5, T1=8, T2=8)


def test_degenerate_coefficients_give_zero_effects():
    p, truth = generate(DgpConfig(N=40, T=4, rho=0.0, beta=0.0, seed=4))
    np.testing.assert_allclose(truth.ape, 0.0, atol=1e-15)


def test_linear_design_moments():
    cfg = DgpConfig(kind="dynamic_linear", N=400, T=20, rho=0.0, beta=0.0,
                    var_alpha=1e-12, var_gamma=1e-12, seed=6)
    p, truth = generate(cfg)
    # y is pure unit noise when every systematic part is switched off
    assert abs(p.y.mean()) < 0.03 and abs(p.y.var() - 1.0) < 0.05
    np.testing.assert_array_equal(truth.ape, [0.0, 0.0])


def test_seed_determinism():
    a, _ = generate(DgpConfig(N=10, T=4), replication_rng(9, 3))
    b, _ = generate(DgpConfig(N=10, T=4), replication_rng(9, 3))
    c, _ = generate(DgpConfig(N=10, T=4), replication_rng(9, 4))
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_summarize_closed_forms():
    st = summarize([1.1, 0.9, 1.2, 1.0], 1.0, [0.1, 0.1, 0.1, 0.1])
    rel = np.array([0.1, -0.1, 0.2, 0.0])
    assert st["bias"] == pytest.approx(5.0)
    assert st["sd"] == pytest.approx(100 * rel.std(ddof=1))
    assert st["rmse"] == pytest.approx(100 * math.sqrt(np.mean(rel**2)))
    assert st["cp95"] == pytest.approx(0.75)
    assert st["se_sd"] == pytest.approx(0.1 / np.std([1.1, 0.9, 1.2, 1.0], ddof=1))


def test_rmse_identity():
    r = np.random.default_rng(0)
    est = 1 + 0.2 * r.normal(size=500)
    st = summarize(est, 1.0)
    n = 500
    assert st["rmse"] ** 2 == pytest.approx(st["bias"] ** 2 + st["sd"] ** 2 * (n - 1) / n)


def test_wald_test():
    stat, rej = wald_test([1.0, 2.0], np.eye(2), [0.0, 0.0])
    assert stat == pytest.approx(5.0) and not rej
    stat, rej = wald_test([3.0, 0.0], np.diag([1.0, 4.0]), [0.0, 0.0])
    assert stat == pytest.approx(9.0) and rej
    assert CHI2_2_95 == pytest.approx(5.991464547)


@pytest.mark.parametrize("text,expect", [
    ("MLE", EstimatorSpec("MLE")), ("abc1(2)", EstimatorSpec("ABC1", 2)), ("ABC3", EstimatorSpec("ABC3", 1)),
    ("SPJ2", EstimatorSpec("SPJ2")), ("LPM (1)", EstimatorSpec("LPM", 1)), ("BC(2)", EstimatorSpec("BC", 2)),
])
def test_parse_estimator(text, expect):
    assert parse_estimator(text) == expect


@pytest.mark.parametrize("text", ["MLE(1)", "GMM", "ABC5(1)"])
def test_parse_estimator_rejects(text):
    with pytest.raises(ValueError):
        parse_estimator(text)


def test_replications_identical_across_threads():
    cfg = DgpConfig(N=30, T=5)
    est = ["MLE", "ABC1(1)", "LPM(1)"]
    one = run_replications(cfg, est, 3, 17, threads=1)
    two = run_replications(cfg, est, 3, 17, threads=2)
    for a, b in zip(one, two):
        assert a.rep == b.rep
        for k in a.records:
            np.testing.assert_array_equal(a.records[k].coef, b.records[k].coef)
            np.testing.assert_array_equal(a.records[k].ape_se, b.records[k].ape_se)


def test_monte_carlo_summary_rows():
    summ = run_monte_carlo(DgpConfig(N=40, T=6), ["MLE", "LPM(1)"], 4, 2)
    assert summ.failures == {"MLE": 0, "LPM (1)": 0}
    assert summ.row("MLE", "coef", "y_lag").n == 4
    with pytest.raises(KeyError):
        summ.row("LPM (1)", "coef", "x")
    assert 0.0 <= summ.wald_size["MLE"] <= 1.0
    d = summ.to_dict()
    assert d["reps"] == 4 and len(d["rows"]) == 4 + 2
