"""Scalar q-special functions and classical Gamma-family helpers.

All functions are pure. ``INFINITY`` is the length sentinel for infinite
q-Pochhammer products.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

INFINITY = math.inf

# Infinite products are truncated once the next factor is within FACTOR_TOL
# of 1 and the bound on the remaining log-tail is below TAIL_TOL.
FACTOR_TOL = 1e-16
TAIL_TOL = 1e-15
Q_MAX_INFINITE = 1.0 - 1e-6


class PoleError(ValueError):
    """Raised when a function is evaluated at (or numerically on) a pole."""


def check_q(q: float, infinite: bool = False) -> float:
    """Validate a base ``q`` in ``[0, 1)``.

    With ``infinite=True`` values above ``1 - 1e-6`` are rejected because the
    truncation bound of infinite products degenerates there.
    """
    q = float(q)
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    if infinite and q > Q_MAX_INFINITE:
        raise ValueError(f"q={q} too close to 1 for an infinite product")
    return q


def truncation_length(abs_a: float, q: float) -> int:
    """Number of factors kept in ``(a;q)_inf`` for a given ``|a|``.

    The remaining factors ``1 - a q^i`` for ``i >= N`` satisfy
    ``|log tail| <= |a| q^N / ((1-q)(1-|a| q^N))`` which is forced below
    ``TAIL_TOL`` together with ``|a q^N| < FACTOR_TOL``.
    """
    if abs_a == 0.0:
        return 0
    if q == 0.0:
        return 1
    target = min(FACTOR_TOL, 0.5 * TAIL_TOL * (1.0 - q))
    n = math.ceil(math.log(target / abs_a) / math.log(q))
    n = max(n, 1)
    # guard against rounding in the logarithms
    while abs_a * q**n >= target:
        n += 1
    return n


def q_pochhammer(a, q: float, n=INFINITY):
    """q-Pochhammer symbol ``(a;q)_n = prod_{i<n} (1 - a q^i)``.

    Parameters
    ----------
    a : complex
        Base point.
    q : float
        Base, ``0 <= q < 1``.
    n : int or INFINITY
        Number of factors.

    Returns
    -------
    complex or float
        Real when ``a`` is real. For ``n = INFINITY`` the absolute error is
        at most ``|value| * (exp(TAIL_TOL) - 1)``.
    """
    infinite = n == INFINITY
    q = check_q(q, infinite=infinite)
    if infinite:
        n = truncation_length(abs(a), q)
    else:
        if n < 0 or int(n) != n:
            raise ValueError(f"length must be a nonnegative integer, got {n}")
        n = int(n)
    if n == 0:
        return 1.0 if np.isrealobj(a) else complex(1.0)
    factors = 1.0 - a * q ** np.arange(n)
    out = np.prod(factors)
    return float(out) if np.isrealobj(out) else complex(out)


def qpoch_table(a: float, q: float, kmax: int) -> np.ndarray:
    """Array ``[(a;q)_0, ..., (a;q)_kmax]`` of finite q-Pochhammer symbols."""
    q = check_q(q)
    out = np.ones(kmax + 1)
    if kmax > 0:
        out[1:] = np.cumprod(1.0 - a * q ** np.arange(kmax))
    return out


def log_qq_table(q: float, kmax: int) -> np.ndarray:
    """Array of ``log (q;q)_k`` for ``k = 0..kmax`` (stable near ``q = 1``)."""
    q = check_q(q)
    out = np.zeros(kmax + 1)
    if kmax > 0:
        out[1:] = np.cumsum(np.log1p(-(q ** np.arange(1, kmax + 1))))
    return out


def q_factorial(k: int, q: float) -> float:
    """``[k]_q! = (q;q)_k / (1-q)^k``; equals ``prod_{i=1}^k (1 + q + ... + q^{i-1})``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    q = check_q(q)
    i = np.arange(1, k + 1)
    # (1 - q^i)/(1 - q) written as a geometric sum avoids 0/0 at q -> 0
    return float(np.prod((1.0 - q**i) / (1.0 - q)))


def q_binomial(n: int, k: int, q: float) -> float:
    """Gaussian binomial ``(q;q)_n / ((q;q)_k (q;q)_{n-k})``."""
    if not 0 <= k <= n:
        raise ValueError(f"q-binomial needs 0 <= k <= n, got n={n}, k={k}")
    q = check_q(q)
    k = min(k, n - k)
    i = np.arange(1, k + 1)
    return float(np.prod((1.0 - q ** (n - k + i)) / (1.0 - q**i)))


def log_q_binomial_row(m: int, q: float) -> np.ndarray:
    """``log binom_q(m, k)`` for ``k = 0..m`` as an array."""
    lq = log_qq_table(q, m)
    return lq[m] - lq - lq[::-1]


def q_gamma(z, q: float):
    """q-Gamma function ``(q;q)_inf (1-q)^{1-z} / (q^z;q)_inf``.

    Raises
    ------
    PoleError
        If some factor ``1 - q^{z+i}`` vanishes (``z`` a nonpositive integer,
        or shifted by a multiple of ``2 pi i / log q``).
    """
    q = check_q(q, infinite=True)
    if q == 0.0:
        raise ValueError("q-Gamma needs 0 < q < 1")
    z = complex(z)
    qz = np.exp(z * math.log(q))
    n = max(truncation_length(max(abs(qz), q), q), 1)
    powers = q ** np.arange(n)
    factors = 1.0 - qz * powers
    if np.min(np.abs(factors)) < 1e-14:
        raise PoleError(f"q-Gamma has a pole at z={z}")
    # both infinite products underflow as q -> 1, their ratio does not
    log_ratio = np.sum(np.log1p(-q * powers)) - np.sum(np.log(factors.astype(complex)))
    val = np.exp(log_ratio + (1.0 - z) * math.log1p(-q))
    return val.real if z.imag == 0.0 else complex(val)


def q_exp(z, q: float):
    """q-exponential ``e_q(z) = 1 / ((1-q) z; q)_inf``."""
    q = check_q(q, infinite=True)
    a = complex(z) * (1.0 - q)
    n = truncation_length(abs(a), q)
    factors = 1.0 - a * q ** np.arange(max(n, 1))
    if np.min(np.abs(factors)) < 1e-14:
        raise PoleError(f"q-exponential has a pole at z={z}")
    val = 1.0 / np.prod(factors)
    return val.real if np.imag(z) == 0 else complex(val)


def rogers_szego(m: int, theta: float, q: float) -> float:
    """Rogers-Szego polynomial ``Z_m(theta) = sum_k theta^k binom_q(m, k)``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    q = check_q(q)
    k = np.arange(m + 1)
    binoms = np.array([q_binomial(m, int(j), q) for j in k])
    return float(np.sum(theta**k * binoms))


def log_gamma(z):
    """Principal branch of ``log Gamma(z)`` (array friendly).

    Raises
    ------
    PoleError
        At nonpositive integers.
    """
    z = np.asarray(z, dtype=complex)
    bad = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if np.any(bad):
        raise PoleError("log Gamma has poles at nonpositive integers")
    out = special.loggamma(z)
    return out[()] if out.ndim == 0 else out


def polygamma(n: int, x):
    """Digamma (``n=0``), trigamma (``n=1``) and tetragamma (``n=2``) at ``x > 0``."""
    if n not in (0, 1, 2):
        raise ValueError("only orders 0, 1, 2 are supported")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("polygamma is restricted to x > 0")
    out = special.digamma(x) if n == 0 else special.polygamma(n, x)
    return float(out) if out.ndim == 0 else out
