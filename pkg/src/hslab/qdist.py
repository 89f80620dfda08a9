"""Samplers and mass/density functions for the laws driving the dynamics.

Discrete laws are sampled by inverse-CDF lookup in cached tables. Every
sampler takes an explicit ``numpy.random.Generator``; use :func:`split` to
derive independent, reproducible streams.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from .qspecial import INFINITY, check_q, log_qq_table, truncation_length

TAIL_TOL = 1e-15


def make_rng(seed: int) -> np.random.Generator:
    """Generator seeded deterministically from an integer seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def split(seed: int, index: int) -> np.random.Generator:
    """Independent stream number ``index`` derived from ``seed``.

    Streams for distinct indices come from distinct SeedSequence spawn keys,
    so they do not depend on how work is scheduled.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _draw(cdf: np.ndarray, rng: np.random.Generator, size):
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


# ---------------------------------------------------------------- q-Geometric


def _check_theta(theta: float):
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"q-geometric parameter must lie in [0, 1), got {theta}")


@lru_cache(maxsize=4096)
def _q_geom_table(theta: float, q: float) -> np.ndarray:
    """pmf values up to the point where the geometric tail bound is negligible."""
    if theta == 0.0:
        return np.array([1.0])
    log_norm = np.sum(np.log1p(-theta * q ** np.arange(truncation_length(theta, q))))
    chunk = 256
    logs = []
    k0 = 0
    log_prev = log_norm  # log pmf(0)
    while True:
        k = np.arange(k0 + 1, k0 + chunk + 1)
        steps = math.log(theta) - np.log1p(-(q**k))
        lp = log_prev + np.concatenate([[0.0], np.cumsum(steps)])
        logs.append(lp[:-1])
        log_prev = lp[-1]
        k0 += chunk
        # ratio pmf(k+1)/pmf(k) = theta/(1-q^{k+1}) decreases in k
        r = theta / (1.0 - q ** (k0 + 1))
        if r < 1.0 and math.exp(log_prev) / (1.0 - r) < TAIL_TOL:
            break
        if k0 > 10_000_000:
            raise RuntimeError("q-geometric table does not converge")
    pmf = np.exp(np.concatenate(logs))
    return pmf


def q_geom_pmf(k, theta: float, q: float):
    """``P(X = k) = theta^k (theta;q)_inf / (q;q)_k``."""
    _check_theta(theta)
    q = check_q(q, infinite=True)
    k = np.asarray(k)
    lq = log_qq_table(q, int(np.max(k)) if k.size else 0)
    log_norm = np.sum(np.log1p(-theta * q ** np.arange(truncation_length(theta, q))))
    with np.errstate(divide="ignore"):
        lt = math.log(theta) if theta > 0 else -math.inf
    kk = np.maximum(k, 0)
    logp = np.where(kk > 0, kk * lt, 0.0) + log_norm - lq[kk]
    out = np.where(k >= 0, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def q_geom_sample(theta: float, q: float, rng: np.random.Generator, size=None):
    """Draw q-geometric variables by inverse-CDF lookup."""
    _check_theta(theta)
    q = check_q(q, infinite=True)
    pmf = _q_geom_table(float(theta), float(q))
    return _draw(np.cumsum(pmf), rng, size)


# ----------------------------------------------------- q-inverse Gaussian


@lru_cache(maxsize=65536)
def _q_inv_gauss_table(m: int, theta: float, q: float) -> np.ndarray:
    lq = log_qq_table(q, m)
    k = np.arange(m + 1)
    logw = k * math.log(theta) + lq[m] - lq - lq[::-1]
    w = np.exp(logw - logw.max())
    # Normalising by the sum is dividing by the Rogers-Szego value Z_m(theta).
    return w / w.sum()


def q_inv_gauss_pmf(k, m, theta: float, q: float):
    """``theta^k binom_q(m,k) / Z_m(theta)`` on ``0..m``; q-geometric when ``m = INFINITY``.

    ``theta > 1`` is accepted for finite ``m`` since the weights stay positive.
    """
    if m == INFINITY:
        return q_geom_pmf(k, theta, q)
    if theta <= 0:
        raise ValueError("q-inverse Gaussian parameter must be positive")
    q = check_q(q)
    k = np.asarray(k)
    pmf = _q_inv_gauss_table(int(m), float(theta), q)
    inside = (k >= 0) & (k <= m)
    out = np.where(inside, pmf[np.clip(k, 0, m)], 0.0)
    return float(out) if out.ndim == 0 else out


def q_inv_gauss_sample(m, theta: float, q: float, rng: np.random.Generator, size=None):
    """Sample the q-inverse Gaussian law (q-geometric for ``m = INFINITY``)."""
    if m == INFINITY:
        return q_geom_sample(theta, q, rng, size)
    if theta <= 0:
        raise ValueError("q-inverse Gaussian parameter must be positive")
    q = check_q(q)
    pmf = _q_inv_gauss_table(int(m), float(theta), q)
    return _draw(np.cumsum(pmf), rng, size)


# ------------------------------------------------------- q-BetaBinomial


def _log_qpoch_signed(a: float, base: float, n: int):
    """log|(a; base)_n| and the sign of the product."""
    if n == 0:
        return 0.0, 1.0
    f = 1.0 - a * base ** np.arange(n)
    if np.any(f == 0):
        return -math.inf, 0.0
    return float(np.sum(np.log(np.abs(f)))), float(np.prod(np.sign(f)))


@lru_cache(maxsize=65536)
def _beta_bin_regular_table(q: float, xi: float, eta: float, y: int) -> np.ndarray:
    """Regime 0 <= eta < xi < 1, finite y."""
    lq = log_qq_table(q, y)
    s = np.arange(y + 1)
    ratio = eta / xi
    a = np.concatenate([[0.0], np.cumsum(np.log1p(-ratio * q ** np.arange(y)))])
    b = np.concatenate([[0.0], np.cumsum(np.log1p(-xi * q ** np.arange(y)))])
    logw = s * math.log(xi) + a[s] + b[y - s] + lq[y] - lq[s] - lq[y - s]
    logw -= np.sum(np.log1p(-eta * q ** np.arange(y)))
    w = np.exp(logw)
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"q-BetaBinomial weights sum to {total}")
    return w / total


@lru_cache(maxsize=4096)
def _beta_bin_regular_infinite(q: float, xi: float, eta: float) -> np.ndarray:
    """``y = INFINITY``: weights xi^s (eta/xi;q)_s (xi;q)_inf / ((eta;q)_inf (q;q)_s)."""
    log_c = np.sum(np.log1p(-xi * q ** np.arange(truncation_length(xi, q))))
    log_c -= np.sum(np.log1p(-eta * q ** np.arange(truncation_length(eta, q))))
    out = [math.exp(log_c)]
    lp = log_c
    s = 0
    ratio = eta / xi
    while True:
        lp += math.log(xi) + math.log1p(-ratio * q**s) - math.log1p(-(q ** (s + 1)))
        s += 1
        out.append(math.exp(lp))
        r = xi / (1.0 - q ** (s + 1))
        if r < 1.0 and out[-1] / (1.0 - r) < TAIL_TOL:
            break
        if s > 10_000_000:
            raise RuntimeError("q-BetaBinomial table does not converge")
    return np.array(out)


@lru_cache(maxsize=65536)
def _beta_bin_inverted_table(q: float, a: int, b, y: int) -> np.ndarray:
    """Weights of phi_{1/q, q^a, q^(a+b)}(s|y) for s = 0..y (b may be INFINITY)."""
    if b != INFINITY and y > a + b:
        raise ValueError("inverted q-BetaBinomial needs y <= a + b")
    big = 1.0 / q
    xi = q**a
    eta = 0.0 if b == INFINITY else q ** (a + b)
    w = np.zeros(y + 1)
    for s in range(y + 1):
        if y - s > a or (b != INFINITY and s > b):
            continue
        l1, s1 = _log_qpoch_signed(eta / xi, big, s)
        l2, s2 = _log_qpoch_signed(xi, big, y - s)
        l3, s3 = _log_qpoch_signed(eta, big, y)
        l4, _ = _log_qpoch_signed(big, big, y)
        l5, _ = _log_qpoch_signed(big, big, s)
        l6, _ = _log_qpoch_signed(big, big, y - s)
        # the base-1/q binomial is positive, so only the three Pochhammers carry signs
        w[s] = s1 * s2 * s3 * math.exp(s * math.log(xi) + l1 + l2 - l3 + l4 - l5 - l6)
    if np.any(w < -1e-12):
        raise AssertionError("inverted q-BetaBinomial produced a negative weight")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"inverted q-BetaBinomial weights sum to {total}")
    return np.clip(w, 0.0, None) / total


def _inverted_params(q: float, xi: float, eta: float):
    """Recover integers a, b from base q > 1 with xi = q^-a and eta = q^-(a+b)."""
    a = math.log(xi) / -math.log(q)
    if abs(a - round(a)) > 1e-9 or round(a) < 0:
        return None
    a = int(round(a))
    if eta == 0.0:
        return a, INFINITY
    ab = math.log(eta) / -math.log(q)
    if abs(ab - round(ab)) > 1e-9 or round(ab) < a:
        return None
    return a, int(round(ab)) - a


def _beta_bin_table(s_max_hint, q, xi, eta, y):
    if 0.0 <= q < 1.0:
        if not 0.0 <= eta < xi < 1.0:
            raise ValueError("q-BetaBinomial with q < 1 needs 0 <= eta < xi < 1")
        if y == INFINITY:
            return _beta_bin_regular_infinite(float(q), float(xi), float(eta))
        return _beta_bin_regular_table(float(q), float(xi), float(eta), int(y))
    if q > 1.0 and y != INFINITY:
        ab = _inverted_params(q, xi, eta)
        if ab is not None:
            return _beta_bin_inverted_table(1.0 / q, ab[0], ab[1], int(y))
    raise ValueError(
        "q-BetaBinomial parameters outside the two supported regimes: "
        "(i) 0<=q<1, 0<=eta<xi<1; (ii) base q>1 with xi=q^-a, eta=q^-(a+b), y<=a+b"
    )


def q_beta_binomial_pmf(s, q: float, xi: float, eta: float, y):
    """q-BetaBinomial weights ``phi_{q,xi,eta}(s|y)``.

    Regime (i): ``0 <= q < 1`` and ``0 <= eta < xi < 1`` with finite ``y`` or
    ``y = INFINITY``. Regime (ii): base ``q > 1`` with ``xi = q^{-a}`` and
    ``eta = q^{-(a+b)}`` (``eta = 0`` meaning ``b = INFINITY``), integers
    ``a, b >= 0`` and ``y <= a + b``.
    """
    table = _beta_bin_table(None, q, xi, eta, y)
    s = np.asarray(s)
    inside = (s >= 0) & (s < len(table))
    out = np.where(inside, table[np.clip(s, 0, len(table) - 1)], 0.0)
    return float(out) if out.ndim == 0 else out


def q_beta_binomial_sample(q, xi, eta, y, rng: np.random.Generator, size=None):
    """Draw from ``phi_{q,xi,eta}(.|y)`` in either supported regime."""
    table = _beta_bin_table(None, q, xi, eta, y)
    return _draw(np.cumsum(table), rng, size)


def q_beta_binomial_inverted_pmf(s, q: float, a: int, b, y: int):
    """``phi_{1/q, q^a, q^(a+b)}(s|y)`` for ``0 < q < 1``; ``b`` may be INFINITY.

    Supported on ``max(0, y-a) <= s <= min(y, b)``.
    """
    check_q(q)
    table = _beta_bin_inverted_table(float(q), int(a), b, int(y))
    s = np.asarray(s)
    inside = (s >= 0) & (s <= y)
    out = np.where(inside, table[np.clip(s, 0, y)], 0.0)
    return float(out) if out.ndim == 0 else out


def q_beta_binomial_inverted_cdf(q: float, a: int, b, y: int) -> np.ndarray:
    """Cumulative table of :func:`q_beta_binomial_inverted_pmf` (cached)."""
    return _inverted_cdf(float(q), int(a), b, int(y))


@lru_cache(maxsize=65536)
def _inverted_cdf(q, a, b, y):
    return np.cumsum(_beta_bin_inverted_table(q, a, b, y))


@lru_cache(maxsize=65536)
def truncated_geom_cdf(q: float, xi: float, y) -> np.ndarray:
    """Cumulative table of ``phi_{q,xi,0}(.|y)`` (a truncated q-geometric law)."""
    if y == INFINITY:
        return np.cumsum(_q_geom_table(float(xi), float(q)))
    return np.cumsum(_beta_bin_regular_table(float(q), float(xi), 0.0, int(y)))


@lru_cache(maxsize=65536)
def q_inv_gauss_cdf(m, theta: float, q: float) -> np.ndarray:
    """Cumulative table of the q-inverse Gaussian law (q-geometric if ``m`` infinite)."""
    if m == INFINITY:
        return np.cumsum(_q_geom_table(float(theta), float(q)))
    return np.cumsum(_q_inv_gauss_table(int(m), float(theta), float(q)))


def sample_from_cdf(cdf: np.ndarray, rng: np.random.Generator, size=None):
    """Inverse-CDF draw from a cumulative table."""
    return _draw(cdf, rng, size)


# -------------------------------------------------- continuous laws


def gamma_sample(shape, rng: np.random.Generator, size=None):
    """Gamma(shape) with unit scale."""
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise ValueError("Gamma shape must be positive")
    return rng.gamma(shape, 1.0, size)


def inv_gamma_sample(shape, rng: np.random.Generator, size=None):
    """Reciprocal of a Gamma(shape) variable."""
    return 1.0 / gamma_sample(shape, rng, size)


def inv_gamma_pdf(x, shape: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = -(shape + 1.0) * np.log(x) - 1.0 / x - special.gammaln(shape)
    return np.where(x > 0, np.exp(lp), 0.0)


def inv_gamma_cdf(x, shape: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, special.gammaincc(shape, 1.0 / np.maximum(x, 1e-300)), 0.0)


def _gig_log_norm(theta: float, L: float) -> float:
    """log of ``2 L^{theta/2} K_theta(2 sqrt L)``."""
    z = 2.0 * math.sqrt(L)
    return math.log(2.0) + 0.5 * theta * math.log(L) + math.log(special.kve(theta, z)) - z


def gig_pdf(x, theta: float, L: float):
    """Density ``x^{theta-1} exp(-x - L/x) / (2 L^{theta/2} K_theta(2 sqrt L))``."""
    if L <= 0:
        raise ValueError("GIG needs L > 0")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = (theta - 1.0) * np.log(x) - x - L / x - _gig_log_norm(theta, L)
    out = np.where(x > 0, np.exp(lp), 0.0)
    return float(out) if out.ndim == 0 else out


def gig_cdf(x, theta: float, L: float):
    """CDF of the GIG law, vectorised over ``x``.

    Gaps between consecutive sorted points are integrated with a 16-node
    Gauss-Legendre panel; wide gaps fall back to adaptive quadrature.
    """
    from scipy import integrate

    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts, inverse = np.unique(np.maximum(x, 0.0), return_inverse=True)
    lo = np.concatenate([[0.0], pts[:-1]])
    half, mid = 0.5 * (pts - lo), 0.5 * (pts + lo)
    nodes, weights = np.polynomial.legendre.leggauss(16)
    pieces = half * (gig_pdf(mid[:, None] + half[:, None] * nodes, theta, L) @ weights)
    for i in np.flatnonzero(half > 0.05):
        pieces[i] = integrate.quad(gig_pdf, lo[i], pts[i], args=(theta, L), limit=200)[0]
    out = np.minimum(np.cumsum(pieces), 1.0)[inverse.reshape(x.shape)]
    return float(out[0]) if scalar else out


class GIGSampler:
    """Rejection sampler for the generalized inverse Gaussian law.

    For ``theta >= 0`` the proposal is Gamma(shape=s, rate=c) with
    ``s = max(theta, 1/2)``; the envelope constant is the maximum of
    ``x^{theta-s} exp(-(1-c) x - L/x)`` and ``c`` is tuned to maximise the
    acceptance rate. Negative ``theta`` uses ``X = L / X'`` with
    ``X' ~ GIG(-theta, L)``.
    """

    def __init__(self, theta: float, L: float):
        if L <= 0:
            raise ValueError("GIG needs L > 0")
        self.theta, self.L = float(theta), float(L)
        self.flip = self.theta < 0
        th = abs(self.theta)
        self.shape = max(th, 0.5)
        from scipy import optimize

        lo = 1e-6 if self.shape > th else 1e-6
        res = optimize.minimize_scalar(
            lambda c: -self._log_accept(th, c), bounds=(lo, 1.0), method="bounded",
            options={"xatol": 1e-6},
        )
        c = float(res.x)
        if self._log_accept(th, 1.0) >= self._log_accept(th, c) and self.shape > th:
            c = 1.0
        self.rate = c
        self.log_m = self._log_env_max(th, c)
        self.acceptance = math.exp(self._log_accept(th, c))

    def _log_env_max(self, th, c):
        s, L = self.shape, self.L
        d = th - s
        if c < 1.0:
            x = (d + math.sqrt(d * d + 4.0 * (1.0 - c) * L)) / (2.0 * (1.0 - c))
        else:
            x = L / (s - th)
        return d * math.log(x) - (1.0 - c) * x - L / x

    def _log_accept(self, th, c):
        s = self.shape
        if c >= 1.0 and s <= th:
            return -math.inf
        log_prop_norm = special.gammaln(s) - s * math.log(c)
        return _gig_log_norm(th, self.L) - self._log_env_max(th, c) - log_prop_norm

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        th = abs(self.theta)
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            batch = int(need / max(self.acceptance, 0.05) * 1.2) + 16
            x = rng.gamma(self.shape, 1.0 / self.rate, batch)
            logr = (th - self.shape) * np.log(x) - (1.0 - self.rate) * x - self.L / x - self.log_m
            keep = x[np.log(rng.random(batch)) < logr][:need]
            out[filled:filled + len(keep)] = keep
            filled += len(keep)
        return self.L / out if self.flip else out


def gig_sample(theta: float, L: float, rng: np.random.Generator, size=None):
    """Draw GIG(theta, L) variables with density proportional to ``x^{theta-1} e^{-x-L/x}``."""
    sampler = _gig_sampler(float(theta), float(L))
    n = 1 if size is None else int(np.prod(size))
    out = sampler.sample(rng, n)
    return float(out[0]) if size is None else out.reshape(size)


@lru_cache(maxsize=256)
def _gig_sampler(theta, L):
    return GIGSampler(theta, L)


# ------------------------------------------------------- q -> 1 scalings


def q_geom_rescale(x, eps: float):
    """Map qGeom draws at ``q = e^{-eps}`` to the scale where they become inverse-Gamma.

    Inverts ``x = log(g)/eps + log(1/eps)/eps``; with ``theta = e^{-eps s}`` the
    result tends to inverse-Gamma(s) as ``eps -> 0``.
    """
    return eps * np.exp(eps * np.asarray(x, dtype=float))


def q_inv_gauss_size(L: float, eps: float) -> int:
    """Nearest integer to ``2 log(1/eps)/eps - log(L)/eps``, the size parameter paired with GIG(., L)."""
    if L <= 0:
        raise ValueError("L must be positive")
    return int(round((2 * math.log(1 / eps) - math.log(L)) / eps))


def q_inv_gauss_rescale(x, eps: float):
    """Map q-inverse-Gaussian draws to the scale where they become GIG.

    Inverts ``x = log(1/eps)/eps - log(y)/eps``.
    """
    return np.exp(math.log(1 / eps) - eps * np.asarray(x, dtype=float))
