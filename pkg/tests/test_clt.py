import json
import math

import numpy as np
import pytest
from scipy.special import ndtr

from branching_clt import catalog
from branching_clt.clt import (
    check_covariance,
    check_ks,
    check_uncorrelated,
    check_variance,
    critical_statistic,
    large_statistic,
    null_calibration,
    small_statistic,
    survival_filter,
    verify_clt_critical,
    verify_clt_large,
    verify_clt_small,
    verify_joint,
    verify_lln,
    verify_martingale_means,
)
from branching_clt.errors import DegenerateVariance, HorizonTooShort, TooFewSurvivors, WrongRegime
from branching_clt.model import build_model
from branching_clt.moments import rho_cross, rho_sq, sigma_sq
from branching_clt.simulator import run_ensemble
from branching_clt.spectral import spectral_decompose
from branching_clt.stats import ks_distance, ks_threshold, normal_cdf


def phi2(d):
    return d.block(2).Phi[:, 0].real


# ---------------------------------------------------------------- statistics


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    x = np.linspace(-30, 8, 400)
    np.testing.assert_allclose(normal_cdf(x), ndtr(x), rtol=1e-12, atol=0)


def test_ks_on_constant_samples():
    assert ks_distance(np.zeros(50), 1.0) >= 0.5


def test_ks_input_checks():
    with pytest.raises(ValueError):
        ks_distance(np.zeros(5), 1.0)
    with pytest.raises(DegenerateVariance):
        ks_distance(np.zeros(50), 0.0)


def test_ks_null_quantile():
    n = 2000
    bound = 1.63 / math.sqrt(n)
    assert ks_threshold(n, 0.99) == pytest.approx(bound, rel=0.02)
    # exceedance rate of the 99% bound over 1000 exact-null samples
    rng = np.random.default_rng(12)
    runs = 1000
    hits = sum(ks_distance(rng.normal(size=n), 1.0) >= bound for _ in range(runs))
    assert hits <= 0.01 * runs + 3 * math.sqrt(0.01 * 0.99 * runs)


def test_check_semantics():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 2, 4000)
    assert check_variance("v", "", x, 4.0).passed
    assert not check_variance("v", "", x, 6.0).passed
    assert check_ks("k", "", x, 4.0).passed
    assert not check_ks("k", "", x, 1.0).passed
    y = x + rng.normal(size=4000)
    assert not check_uncorrelated("c", "", x, y).passed
    assert check_covariance("cv", "", x, y, 4.0).passed


def test_null_calibration():
    report = null_calibration(runs=100, N=5000, seed=1)
    assert report.passed
    assert {c.claim_id for c in report.claims} == {f"null.{k}" for k in
                                                    ("variance", "ks", "correlation", "covariance", "mean")}


# ---------------------------------------------------------------- survival filter


def test_survival_identity_without_deaths(models):
    m, d = models["small_pair"]
    ens = run_ensemble(m, d, 0, 1.0, N=150, master_seed=3)
    assert survival_filter(ens, "none").N == 150
    assert survival_filter(ens, "threshold", 0.0).N == 150


def test_survival_fraction_matches_extinction_probability():
    # binary splitting with deaths: extinction probability p0 / p2 = 1/3
    m = build_model({"Q": [[0.0]], "beta": 1.0, "offspring": [0.25, 0.0, 0.75]})
    d = spectral_decompose(m)
    ens = run_ensemble(m, d, 0, 16.0, N=3000, master_seed=8, checkpoints=[8.0, 16.0])
    early = survival_filter(ens, "threshold", 0.0, t_index=0).N / 3000
    late = survival_filter(ens, "threshold", 0.0, t_index=1).N / 3000
    se = math.sqrt(2 / 9 / 3000)
    assert abs(late - 2 / 3) < 3 * se
    assert abs(early - late) < 3 * se


def test_too_few_survivors(yule):
    m, d = yule
    ens = run_ensemble(m, d, 0, 0.5, N=50, master_seed=0)
    with pytest.raises(TooFewSurvivors):
        survival_filter(ens, "none")


# ---------------------------------------------------------------- normalized statistics


def test_statistic_forms(models):
    m, d = models["large_block_pair"]
    ens = run_ensemble(m, d, 0, 6.0, N=20, master_seed=2, checkpoints=[2.0, 6.0])
    X, XT = ens.counts[:, 0, :].astype(float), ens.counts[:, 1, :].astype(float)
    WT = math.exp(d.lam1 * 6.0) * (XT @ d.phi1)
    want = (X @ d.phi1 - math.exp(-d.lam1 * 2.0) * WT) / np.sqrt(X @ d.phi1)
    np.testing.assert_allclose(large_statistic(ens, d, d.phi1, 2.0, 6.0), want, rtol=1e-12)
    h = phi2(d)
    np.testing.assert_allclose(critical_statistic(ens, d, h, 2.0, 0), (X @ h) / np.sqrt(2.0 * (X @ d.phi1)))
    np.testing.assert_allclose(small_statistic(ens, d, h, 2.0), (X @ h) / np.sqrt(X @ d.phi1))


# ---------------------------------------------------------------- regime and horizon errors


def test_wrong_regime_errors(models):
    m, d = models["small_pair"]
    with pytest.raises(WrongRegime):
        verify_clt_small(m, d, d.phi1, 0, 1.0, 200, 0)
    with pytest.raises(WrongRegime):
        verify_clt_critical(m, d, phi2(d), 0, 1.0, 200, 0)
    with pytest.raises(WrongRegime):
        verify_clt_large(m, d, phi2(d), 0, 1.0, 20.0, 200, 0)
    with pytest.raises(WrongRegime):
        verify_lln(m, d, phi2(d), 0, [1, 2], 200, 0)


def test_horizon_too_short(models):
    m, d = models["large_block_pair"]
    # g = phi1 has gap -lam1 = 1, so the horizon must reach t + 5
    with pytest.raises(HorizonTooShort):
        verify_clt_large(m, d, d.phi1, 0, 2.0, T_est=6.0, N=200, seed=0)
    # g with the rate 0.8 block has gap 0.6
    with pytest.raises(HorizonTooShort):
        verify_clt_large(m, d, phi2(d), 0, 2.0, T_est=10.0, N=200, seed=0)


# ---------------------------------------------------------------- small runs of each verifier


def test_small_clt_and_scale_equivariance(models):
    m, d = models["small_pair"]
    f = phi2(d)
    a = verify_clt_small(m, d, f, 0, 8.0, 400, 5)
    b = verify_clt_small(m, d, 3 * f, 0, 8.0, 400, 5)
    assert a.passed and b.passed
    assert b.claim("small.variance").predicted == pytest.approx(9 * a.claim("small.variance").predicted, rel=1e-10)
    assert b.claim("small.ks").distance == pytest.approx(a.claim("small.ks").distance, rel=1e-12)
    assert a.meta["retained"] == 400


def test_critical_clt_and_pair_scaling(models):
    m, d = models["critical_pair"]
    h = phi2(d)
    # a start with <h, nu> = 0 avoids the slowly decaying initial offset
    report = verify_clt_critical(m, d, h, [2, 2], 6.0, 400, 7, h2=2 * h)
    assert report.passed
    assert report.claim("critical.pair.covariance").predicted == pytest.approx(2 * rho_sq(d, m, h), rel=1e-12)
    assert rho_cross(d, m, h, 2 * h) == pytest.approx(2 * rho_sq(d, m, h), rel=1e-12)
    assert report.claim("critical.control").passed


def test_large_clt_small_run(models):
    m, d = models["large_block_pair"]
    report = verify_clt_large(m, d, d.phi1, 0, 1.5, N=300, seed=4, horizon_factor=3.0, T_est=5.0, bias_check=True)
    ids = {c.claim_id for c in report.claims}
    assert {"large.variance", "large.ks", "large.indep_W", "large.proxy_bias"} <= ids
    assert report.claim("large.variance").passed


def test_pair_identity_correlation(models):
    m, d = models["four_regimes"]
    f = d.block(3).Phi[:, 0].real
    report = verify_joint(m, d, None, None, f, 0, 4.0, 200, 3, pairs={"f": f})
    c = report.claim("joint.small_pair.covariance")
    assert c.predicted == pytest.approx(sigma_sq(d, m, f), rel=1e-12)


def test_lln_rotation_negative_control(models):
    m, d = models["complex_large"]
    f = phi2(d)
    grid = [2, 4, 6, 8, 10]
    assert verify_lln(m, d, f, 0, grid, 300, 11).passed
    assert not verify_lln(m, d, f, 0, grid, 300, 11, rotate=False).passed


def test_lln_leading_eigenfunction(models):
    m, d = models["small_pair"]
    report = verify_lln(m, d, d.phi1, 0, [2, 4, 6, 8], 300, 2)
    assert report.passed


def test_martingale_means_report(models):
    m, d = models["complex_large"]
    report = verify_martingale_means(m, d, 0, 1.5, 2000, 6)
    assert report.passed
    assert "mart.H2.im" in {c.claim_id for c in report.claims}


def test_report_serialization(models):
    m, d = models["small_pair"]
    report = verify_clt_small(m, d, phi2(d), 0, 6.0, 200, 1)
    data = json.loads(report.to_json())
    assert data["passed"] == report.passed
    assert {"claim_id", "statement", "predicted", "observed", "standard_error", "distance", "tolerance",
            "passed"} <= set(data["claims"][0])
    md = report.to_markdown()
    assert md.startswith("# small-regime CLT") and "| small.variance |" in md


@pytest.mark.slow
def test_joint_four_regimes():
    m = catalog.four_regimes()
    d = spectral_decompose(m)
    report = verify_joint(m, d, d.phi1, d.block(2).Phi[:, 0].real, d.block(3).Phi[:, 0].real, np.ones(4), 8.0, 600,
                          5, T_est=11.0)
    assert report.passed, report.to_markdown()
    corr = [c for c in report.claims if c.claim_id.startswith("joint.indep.")]
    assert len(corr) == 6
