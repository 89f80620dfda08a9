import math

import numpy as np
import pytest
from scipy import integrate

from hslab import qdist as qd
from hslab import stats
from hslab.qspecial import INFINITY, rogers_szego


def poch(a, q, n):
    return math.prod(1 - a * q**i for i in range(n))


def beta_bin_direct(s, q, xi, eta, y):
    """Weights written exactly as in the definition (any base q)."""
    return (xi**s * poch(eta / xi, q, s) * poch(xi, q, y - s) / poch(eta, q, y)
            * poch(q, q, y) / (poch(q, q, s) * poch(q, q, y - s)))


def chi2_sampler(draws, pmf_fn, kmax):
    counts = np.bincount(draws, minlength=kmax + 1)[: kmax + 1]
    assert draws.max() <= kmax
    return stats.chi2_test(counts, pmf_fn(np.arange(kmax + 1))).p_value


# ------------------------------------------------------------------ streams


def test_streams_reproducible_and_distinct():
    a = qd.split(5, 3).random(4)
    assert np.array_equal(a, qd.split(5, 3).random(4))
    assert not np.array_equal(a, qd.split(5, 4).random(4))
    assert np.array_equal(qd.make_rng(9).random(3), qd.make_rng(9).random(3))


# -------------------------------------------------------------- q-Geometric


def test_q_geom_degenerate_cases():
    rng = qd.make_rng(0)
    assert np.all(qd.q_geom_sample(0.0, 0.5, rng, 100) == 0)
    th = 0.35
    k = np.arange(20)
    assert np.allclose(qd.q_geom_pmf(k, th, 0.0), th**k * (1 - th), rtol=1e-14)
    with pytest.raises(ValueError):
        qd.q_geom_pmf(1, 1.0, 0.5)


def test_q_geom_normalized():
    for th, q in [(0.3, 0.5), (0.9, 0.2), (0.97, 0.9)]:
        total = qd.q_geom_pmf(np.arange(4000), th, q).sum()
        assert abs(total - 1) < 1e-12


def test_q_geom_sampler_chi2():
    th, q = 0.6, 0.5
    x = qd.q_geom_sample(th, q, qd.make_rng(1), 100_000)
    assert chi2_sampler(x, lambda k: qd.q_geom_pmf(k, th, q), int(x.max())) > 1e-3


# ------------------------------------------------------ q-inverse Gaussian


def test_q_inv_gauss_pmf():
    th, q = 0.3, 0.5
    assert qd.q_inv_gauss_pmf(0, 0, th, q) == 1.0
    z = rogers_szego(2, th, q)
    expect = [1 / z, (1 + q) * th / z, th**2 / z]
    assert np.allclose(qd.q_inv_gauss_pmf(np.arange(3), 2, th, q), expect, rtol=1e-14)
    assert qd.q_inv_gauss_pmf(3, 2, th, q) == 0
    k = np.arange(15)
    assert np.allclose(qd.q_inv_gauss_pmf(k, INFINITY, th, q), qd.q_geom_pmf(k, th, q))
    for m in (1, 7, 40):
        assert abs(qd.q_inv_gauss_pmf(np.arange(m + 1), m, 0.8, 0.6).sum() - 1) < 1e-12


def test_q_inv_gauss_sampler_chi2():
    m, th, q = 12, 0.7, 0.6
    x = qd.q_inv_gauss_sample(m, th, q, qd.make_rng(2), 100_000)
    assert x.min() >= 0 and x.max() <= m
    assert chi2_sampler(x, lambda k: qd.q_inv_gauss_pmf(k, m, th, q), m) > 1e-3


# --------------------------------------------------------- q-BetaBinomial


def test_beta_binomial_regular_regime():
    q, xi, eta, y = 0.5, 0.6, 0.2, 6
    pmf = qd.q_beta_binomial_pmf(np.arange(y + 1), q, xi, eta, y)
    direct = [beta_bin_direct(s, q, xi, eta, y) for s in range(y + 1)]
    assert np.allclose(pmf, direct, rtol=1e-13)
    assert abs(pmf.sum() - 1) < 1e-12
    assert qd.q_beta_binomial_pmf(0, q, xi, eta, 0) == 1.0


def test_beta_binomial_degenerates_to_q_geom():
    k = np.arange(25)
    assert np.allclose(qd.q_beta_binomial_pmf(k, 0.5, 0.6, 0.0, INFINITY), qd.q_geom_pmf(k, 0.6, 0.5), rtol=1e-12)


def test_beta_binomial_inverted_regime():
    q = 0.5
    # a = 2, b infinite, y = 1: two weights from the definition at base 1/q, eta -> 0
    w = qd.q_beta_binomial_inverted_pmf(np.arange(2), q, 2, INFINITY, 1)
    Q = 1 / q
    direct = [beta_bin_direct(s, Q, q**2, 0.0, 1) for s in range(2)]
    assert np.allclose(w, direct, rtol=1e-13)
    assert abs(w.sum() - 1) < 1e-14
    for a, b, y in [(3, 2, 4), (1, 4, 5), (5, INFINITY, 3)]:
        w = qd.q_beta_binomial_inverted_pmf(np.arange(y + 1), q, a, b, y)
        assert abs(w.sum() - 1) < 1e-12
        assert np.all(w >= 0)
    with pytest.raises(ValueError):
        qd.q_beta_binomial_inverted_pmf(0, q, 1, 1, 3)


def test_beta_binomial_rejects_other_regimes():
    with pytest.raises(ValueError):
        qd.q_beta_binomial_pmf(0, 0.5, 0.2, 0.6, 3)


def test_beta_binomial_sampler_chi2():
    q, xi, eta, y = 0.6, 0.7, 0.3, 8
    x = qd.q_beta_binomial_sample(q, xi, eta, y, qd.make_rng(3), 100_000)
    assert chi2_sampler(x, lambda s: qd.q_beta_binomial_pmf(s, q, xi, eta, y), y) > 1e-3


# ------------------------------------------------ continuous distributions


def test_gamma_and_inverse_gamma_means():
    rng = qd.make_rng(4)
    g = qd.gamma_sample(2.5, rng, 200_000)
    assert abs(g.mean() - 2.5) < 4 * g.std() / math.sqrt(g.size)
    ig = qd.inv_gamma_sample(7.0, rng, 200_000)
    assert abs(ig.mean() - 1 / 6) < 4 * ig.std() / math.sqrt(ig.size)
    big = qd.gamma_sample(1e6, rng, 1000) / 1e6
    assert np.max(np.abs(big - 1)) < 0.01
    with pytest.raises(ValueError):
        qd.gamma_sample(0.0, rng)


@pytest.mark.parametrize("theta,L", [(1.5, 0.3), (-0.7, 2.0), (0.2, 5.0), (3.0, 0.01)])
def test_gig_density_normalized(theta, L):
    total = integrate.quad(qd.gig_pdf, 0, np.inf, args=(theta, L), limit=400)[0]
    assert abs(total - 1) < 1e-8


def test_gig_sampler_ks_and_acceptance():
    rng = qd.make_rng(5)
    for theta, L in [(1.5, 0.3), (-0.7, 2.0), (0.2, 5.0)]:
        x = qd.gig_sample(theta, L, rng, 50_000)
        d = stats.ks_distance(x, lambda v: qd.gig_cdf(v, theta, L))
        assert stats.ks_pvalue(d, x.size) > 1e-3
        assert qd.GIGSampler(theta, L).acceptance > 0.2
    with pytest.raises(ValueError):
        qd.gig_pdf(1.0, 1.0, 0.0)


def test_gig_reflection_symmetry():
    rng = qd.make_rng(6)
    theta, L = 0.8, 1.7
    a = qd.gig_sample(theta, L, rng, 40_000)
    b = L / qd.gig_sample(-theta, L, rng, 40_000)
    assert stats.ks_two_sample(a, b)[1] > 1e-3


def test_gig_small_L_approaches_gamma():
    from scipy.stats import gamma
    rng = qd.make_rng(7)
    ds = [stats.ks_distance(qd.gig_sample(1.3, L, rng, 40_000), gamma(1.3).cdf) for L in (0.5, 0.05, 0.001)]
    assert ds[0] > ds[1] > ds[2] or ds[2] < 0.01


# ------------------------------------------------------------ q -> 1 limits


def test_q_geom_to_inverse_gamma():
    eps, s = 0.01, 2.5
    x = qd.q_geom_sample(math.exp(-eps * s), math.exp(-eps), qd.make_rng(8), 100_000)
    g = qd.q_geom_rescale(x, eps)
    assert stats.ks_distance(g, lambda v: qd.inv_gamma_cdf(v, s)) < 0.02


def test_q_inv_gauss_to_gig():
    eps, s, L = 0.01, 0.7, 1.3
    m = qd.q_inv_gauss_size(L, eps)
    x = qd.q_inv_gauss_sample(m, math.exp(-eps * s), math.exp(-eps), qd.make_rng(9), 100_000)
    y = qd.q_inv_gauss_rescale(x, eps)
    assert stats.ks_distance(y, lambda v: qd.gig_cdf(v, s, L)) < 0.03
