import numpy as np
import pytest
from hypothesis import given, strategies as st

from entrainprof.stats import mixed
from entrainprof.stats.mixed import SingularDesignError, fit_crossed, ols


def crossed_data(rng, n_spk=6, per=40, beta=-1.0, sd_u=0.5, sd_e=1.0):
    resp = np.repeat(np.arange(n_spk), per)
    init = rng.integers(0, n_spk, len(resp))
    pairing = rng.integers(0, 2, len(resp)).astype(float)
    u = rng.normal(0, sd_u, n_spk)
    w = rng.normal(0, sd_u, n_spk)
    y = 2.0 + beta * pairing + u[resp] + w[init] + rng.normal(0, sd_e, len(resp))
    X = np.column_stack([np.ones(len(y)), pairing])
    return y, X, [resp, init]


def test_zero_variance_is_ols(rng):
    y, X, groups = crossed_data(rng)
    fit = fit_crossed(y, X, groups, ["(Intercept)", "pairing"], theta=0.0)
    coef, se, p = ols(y, X)
    assert np.max(np.abs(fit.coef - coef)) < 1e-6
    assert np.max(np.abs(fit.se - se)) < 1e-6
    assert abs(fit.wald("pairing")[3] - p[1]) < 1e-6


def test_gls_closed_form(rng):
    # balanced: two speakers, five observations each per pairing level
    spk = np.repeat([0, 1], 10)
    pairing = np.tile(np.repeat([0.0, 1.0], 5), 2)
    y = 1.0 - 0.7 * pairing + np.where(spk == 1, 0.4, -0.4) + rng.normal(0, 0.3, 20)
    X = np.column_stack([np.ones(20), pairing])
    theta = 2.5
    Z = np.eye(2)[spk]
    V = np.eye(20) + theta * Z @ Z.T
    Vi = np.linalg.inv(V)
    beta = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)
    fit = fit_crossed(y, X, [spk], theta=theta)
    assert np.allclose(fit.coef, beta, atol=1e-10)
    r = y - X @ beta
    sigma2 = r @ Vi @ r / 20
    assert fit.sigma2 == pytest.approx(sigma2, rel=1e-10)
    _, logdet = np.linalg.slogdet(2 * np.pi * sigma2 * V)
    assert fit.loglik == pytest.approx(-0.5 * (logdet + 20), rel=1e-10)


def test_ml_beats_fixed_theta(rng):
    y, X, groups = crossed_data(rng, sd_u=1.0)
    best = fit_crossed(y, X, groups)
    for t in ([0.0, 0.0], [0.5, 0.5], [2.0, 0.1]):
        assert best.loglik >= fit_crossed(y, X, groups, theta=t).loglik - 1e-6


def test_variance_ratio_recovered(rng):
    y, X, groups = crossed_data(rng, n_spk=30, per=30, sd_u=1.0, sd_e=1.0)
    fit = fit_crossed(y, X, groups)
    assert 0.4 < fit.theta[0] < 2.5 and 0.4 < fit.theta[1] < 2.5


@given(st.integers(0, 2 ** 31), st.integers(8, 30))
def test_zero_variance_wald_matches_ols_property(seed, per):
    rng = np.random.default_rng(seed)
    y, X, groups = crossed_data(rng, n_spk=3, per=per)
    fit = fit_crossed(y, X, groups, theta=0.0)
    assert abs(fit.wald("x1")[3] - ols(y, X)[2][1]) < 1e-6


def test_aliased_design_detected():
    X = np.column_stack([np.ones(6), [0, 0, 0, 1, 1, 1], [0, 0, 0, 1, 1, 1]])
    assert mixed.independent_columns(X) == [0, 1]
    with pytest.raises(SingularDesignError):
        mixed.independent_columns(X, protect=(0, 2))
    with pytest.raises(SingularDesignError):
        fit_crossed(np.ones(2), np.ones((2, 2)))


def test_permutation_fallback(rng):
    clusters = np.repeat(np.arange(5), 20)
    lab = np.tile([True, False], 50)
    y = rng.normal(0, 1, 100) - 1.5 * lab
    est, _, p = mixed.permutation_test(y, lab, clusters, rng, 199)
    assert est < -1 and p <= 0.01
    null = rng.normal(0, 1, 100)
    _, _, p0 = mixed.permutation_test(null, lab, clusters, rng, 199)
    assert p0 > 0.01
