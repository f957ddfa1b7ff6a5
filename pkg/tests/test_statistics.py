import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from mulog.channelizer import ChannelBasis
from mulog.exceptions import DomainError
from mulog.hermitian import mat_log
from mulog.statistics import (
    SpeckleModel,
    digamma,
    fisher_tippett_logpdf,
    ft_stats,
    gamma_logpdf,
    log_multigamma,
    logdet_trace_stats,
    make_rng,
    neg_log_likelihood,
    polygamma,
    sample_gamma_speckle,
    sample_wishart,
    wishart_density,
    wishart_logpdf,
)

EULER_GAMMA = 0.5772156649015329


def test_special_values():
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-14)
    assert digamma(2.0) == pytest.approx(1.0 - EULER_GAMMA, abs=1e-14)
    assert polygamma(1, 1.0) == pytest.approx(math.pi**2 / 6, abs=1e-13)
    np.testing.assert_allclose(digamma(np.array([1.0, 2.0])), [-EULER_GAMMA, 1.0 - EULER_GAMMA])


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_special_domain(bad):
    with pytest.raises(DomainError):
        digamma(bad)
    with pytest.raises(DomainError):
        polygamma(1, bad)


def test_polygamma_order():
    with pytest.raises(DomainError):
        polygamma(0, 1.0)


@given(st.floats(0.05, 200.0))
def test_digamma_recurrence(x):
    assert digamma(x + 1.0) == pytest.approx(digamma(x) + 1.0 / x, rel=1e-10, abs=1e-10)


def test_ft_stats():
    one = ft_stats(1.0)
    assert one.bias == pytest.approx(-EULER_GAMMA, abs=1e-14)
    assert one.variance == pytest.approx(math.pi**2 / 6, abs=1e-13)
    many = ft_stats(100.0)
    assert abs(many.bias) < 0.01
    assert many.variance == pytest.approx(0.01, rel=0.01)


def test_speckle_model():
    assert SpeckleModel(1.0).flavor == "gamma"
    model = SpeckleModel(2.0, 3)
    assert model.flavor == "wishart"
    assert model.rank_deficient
    with pytest.raises(DomainError):
        SpeckleModel(0.0)


def test_make_rng():
    g = np.random.default_rng(3)
    assert make_rng(g) is g
    assert make_rng(5).standard_normal() == make_rng(5).standard_normal()


def test_gamma_speckle_deterministic():
    r = np.full((8, 8), 2.0)
    np.testing.assert_array_equal(sample_gamma_speckle(r, 3.0, 11), sample_gamma_speckle(r, 3.0, 11))
    assert not np.array_equal(sample_gamma_speckle(r, 3.0, 11), sample_gamma_speckle(r, 3.0, 12))


@pytest.mark.parametrize("looks", [1.0, 2.5, 8.0])
def test_gamma_speckle_moments(looks):
    n, r = 200_000, 3.0
    i = sample_gamma_speckle(np.full(n, r), looks, 7)
    mean_se = math.sqrt(r * r / looks / n)
    assert abs(i.mean() - r) < 4 * mean_se
    assert i.var() == pytest.approx(r * r / looks, rel=0.05)


def test_gamma_speckle_distribution():
    looks, r = 2.0, 1.5
    i = sample_gamma_speckle(np.full(5000, r), looks, 21)
    res = stats.kstest(i, stats.gamma(a=looks, scale=r / looks).cdf)
    assert res.pvalue > 1e-4


def test_log_speckle_moments():
    looks = 3.0
    y = np.log(sample_gamma_speckle(np.ones(200_000), looks, 8))
    ft = ft_stats(looks)
    assert abs(y.mean() - ft.bias) < 4 * math.sqrt(ft.variance / y.size)


def test_gamma_logpdf_integrates_to_one():
    total, _ = integrate.quad(lambda i: math.exp(gamma_logpdf(i, 2.0, 3.0)), 0, math.inf)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_fisher_tippett_is_log_change_of_variables():
    y = np.linspace(-3.0, 2.0, 11)
    np.testing.assert_allclose(
        fisher_tippett_logpdf(y, 0.4, 2.0),
        gamma_logpdf(np.exp(y), math.exp(0.4), 2.0) + y,
        rtol=1e-12,
        atol=1e-12,
    )


def test_wishart_d1_matches_gamma():
    r = np.linspace(0.5, 4.0, 64).reshape(8, 8)
    c = sample_wishart(r[..., None, None], 4.0, 99)
    np.testing.assert_array_equal(c[..., 0, 0].real, sample_gamma_speckle(r, 4.0, 99))


def test_wishart_mean_and_trace(rng, hpd):
    sigma = hpd(rng, 1, 2)[0]
    looks, n = 3, 40_000
    c = sample_wishart(sigma, looks, 5, shape=(n,))
    mean = c.mean(axis=0)
    d = np.real(np.diag(sigma))
    se = np.sqrt(np.outer(d, d) / (looks * n))
    assert np.all(np.abs(mean - sigma) < 4 * se)

    t = np.einsum("ij,nji->n", np.linalg.inv(sigma), c).real
    assert abs(t.mean() - 2.0) < 4 * math.sqrt(2.0 / looks / n)


def test_wishart_white_factorization(rng, hpd):
    sigma = hpd(rng, 1, 3)[0]
    c, white = sample_wishart(sigma, 3, 1, shape=(50,), return_white=True)
    np.testing.assert_allclose(
        np.linalg.det(c), np.linalg.det(sigma) * np.linalg.det(white), rtol=1e-9
    )


def test_wishart_rejects_fractional_looks(rng, hpd):
    with pytest.raises(DomainError):
        sample_wishart(hpd(rng, 1, 2)[0], 1.5, 0, shape=(4,))
    with pytest.raises(DomainError):
        sample_wishart(np.array([[1.0, 1.0], [1.0, 1.0]]), 2, 0, shape=(4,))


def test_logdet_stats(rng, hpd):
    sigma = hpd(rng, 1, 2)[0]
    looks, n = 4, 40_000
    c = sample_wishart(sigma, looks, 6, shape=(n,))
    logdet = np.linalg.slogdet(c)[1]
    mean, var = logdet_trace_stats(mat_log(sigma), looks, 2)
    assert abs(logdet.mean() - mean) < 4 * math.sqrt(var / n)
    assert logdet.var() == pytest.approx(var, rel=0.05)
    with pytest.raises(DomainError):
        logdet_trace_stats(mat_log(sigma), 1, 2)


def test_neg_log_likelihood():
    basis = ChannelBasis.identity(1)
    y = np.zeros((4, 4, 1))
    assert neg_log_likelihood(y, y, 1.0, basis) == pytest.approx(16.0)
    assert neg_log_likelihood(y, y, 1.0, basis) < neg_log_likelihood(y + 0.1, y, 1.0, basis)
    assert neg_log_likelihood(y, y, 1.0, basis) < neg_log_likelihood(y - 0.1, y, 1.0, basis)
    # L (x + e^{y-x}) at x = 1, y = 0
    assert neg_log_likelihood(np.ones((1, 1)), np.zeros((1, 1)), 2.0, basis) == pytest.approx(
        2.0 * (1.0 + math.exp(-1.0))
    )


def test_log_multigamma_d1():
    assert log_multigamma(3.7, 1) == pytest.approx(special.gammaln(3.7))


def test_wishart_logpdf_d1_is_gamma():
    for i in (0.3, 1.0, 4.2):
        assert wishart_logpdf(np.array([[i]]), np.array([[2.0]]), 2.5) == pytest.approx(
            gamma_logpdf(i, 2.0, 2.5), rel=1e-12
        )


def test_wishart_density_integrates_d1():
    total, _ = integrate.quad(
        lambda i: wishart_density(np.array([[i]]), np.array([[2.0]]), 2.5), 0, math.inf
    )
    assert total == pytest.approx(1.0, abs=1e-8)


def test_wishart_logpdf_scaled_identity_mode():
    looks, d = 5.0, 2
    mode = (looks - d) / looks
    peak = wishart_logpdf(mode * np.eye(d), np.eye(d), looks)
    assert peak > wishart_logpdf(0.9 * mode * np.eye(d), np.eye(d), looks)
    assert peak > wishart_logpdf(1.1 * mode * np.eye(d), np.eye(d), looks)


def test_wishart_logpdf_importance_ratio(rng, hpd):
    sigma = hpd(rng, 1, 2)[0]
    proposal = 1.1 * sigma
    looks, n = 4, 40_000
    c = sample_wishart(proposal, looks, 9, shape=(n,))
    w = np.exp(wishart_logpdf(c, sigma, looks) - wishart_logpdf(c, proposal, looks))
    assert abs(w.mean() - 1.0) < 4 * w.std() / math.sqrt(n)


def test_wishart_logpdf_domain():
    with pytest.raises(DomainError):
        wishart_logpdf(np.eye(3), np.eye(3), 2.0)
    with pytest.raises(DomainError):
        wishart_logpdf(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2), 3.0)


def test_wishart_trace_moments(rng, hpd):
    sigma = hpd(rng, 1, 3)[0]
    looks, n = 3, 100_000
    c = sample_wishart(sigma, looks, 12, shape=(n,))
    tr = np.trace(c, axis1=-2, axis2=-1).real
    tr_sigma = np.trace(sigma).real
    tr_sigma2 = np.trace(sigma @ sigma).real
    var = tr_sigma2 / looks
    assert abs(tr.mean() - tr_sigma) < 4 * math.sqrt(var / n)
    assert tr.var() == pytest.approx(var, rel=0.05)

    excess = np.einsum("nij,nji->n", c, c).real - tr_sigma2
    assert abs(excess.mean() - tr_sigma**2 / looks) < 4 * excess.std() / math.sqrt(n)
