"""Partitions, Macdonald P/Q polynomials and the half-space Macdonald measure.

Polynomials are evaluated through the branching (tableau) formula: a sum over
chains of horizontal strips weighted by the ``psi``/``phi`` coefficients. The
coefficients are computed in plain Python arithmetic, so passing
``fractions.Fraction`` values for ``q``, ``t`` and the variables gives exact
rational results on small partitions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

from .qspecial import q_pochhammer

Partition = tuple  # canonical form: tuple of positive ints, weakly decreasing


class TruncationError(RuntimeError):
    """Enumeration budget exhausted before the requested mass was reached."""

    def __init__(self, message: str, mass: float):
        super().__init__(message)
        self.mass = mass


class UnsupportedSpecialization(ValueError):
    """Raised for specializations the exact evaluators cannot handle."""


def as_partition(parts: Sequence[int]) -> Partition:
    """Validate ``parts`` and return the canonical tuple without trailing zeros."""
    p = tuple(int(x) for x in parts)
    if any(x < 0 for x in p):
        raise ValueError(f"partition parts must be nonnegative: {parts}")
    if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
        raise ValueError(f"partition parts must be weakly decreasing: {parts}")
    return tuple(x for x in p if x > 0)


def weight(lam: Sequence[int]) -> int:
    return int(sum(lam))


def length(lam: Sequence[int]) -> int:
    return sum(1 for x in lam if x > 0)


def _part(lam: Partition, i: int) -> int:
    """0-based part access with implicit zeros."""
    return lam[i] if i < len(lam) else 0


def conjugate(lam: Sequence[int]) -> Partition:
    lam = as_partition(lam)
    if not lam:
        return ()
    return tuple(sum(1 for x in lam if x >= i) for i in range(1, lam[0] + 1))


def _check_box(lam: Partition, box) -> tuple[int, int]:
    i, j = box
    if not (1 <= i <= len(lam) and 1 <= j <= lam[i - 1]):
        raise ValueError(f"box {box} is not in the diagram of {lam}")
    return i, j


def arm(lam: Sequence[int], box) -> int:
    """Boxes to the right of ``box = (row, col)`` (1-based)."""
    lam = as_partition(lam)
    i, j = _check_box(lam, box)
    return lam[i - 1] - j


def leg(lam: Sequence[int], box) -> int:
    """Boxes below ``box = (row, col)`` (1-based)."""
    lam = as_partition(lam)
    i, j = _check_box(lam, box)
    return conjugate(lam)[j - 1] - i


def interlaces(mu: Sequence[int], lam: Sequence[int]) -> bool:
    """True when ``lam_i >= mu_i >= lam_{i+1}`` for all i (``lam/mu`` a horizontal strip)."""
    mu, lam = as_partition(mu), as_partition(lam)
    n = max(len(lam), len(mu))
    return all(_part(lam, i) >= _part(mu, i) >= _part(lam, i + 1) for i in range(n))


def is_dual_even(lam: Sequence[int]) -> bool:
    """All columns of even length, i.e. the parts come in equal pairs."""
    lam = as_partition(lam)
    return all(c % 2 == 0 for c in conjugate(lam))


def strips_below(lam: Partition, max_length: int | None = None):
    """All ``mu`` with ``lam/mu`` a horizontal strip, optionally with ``l(mu) <= max_length``."""
    n = len(lam)
    ranges = [range(_part(lam, i + 1), lam[i] + 1) for i in range(n)]
    for mu in itertools.product(*ranges):
        mu = tuple(x for x in mu if x > 0)
        if max_length is None or len(mu) <= max_length:
            yield mu


def strips_above(mu: Partition, max_length: int, max_add: int):
    """All ``lam`` with ``lam/mu`` a horizontal strip, ``l(lam) <= max_length`` and ``|lam/mu| <= max_add``."""
    k = len(mu)
    if k > max_length:
        return
    rows = min(k + 1, max_length)

    def rec(i, prev_lam, budget, acc):
        if i == rows:
            yield tuple(x for x in acc if x > 0)
            return
        lo = _part(mu, i)
        hi = lo + budget if i == 0 else min(_part(mu, i - 1), lo + budget)
        for v in range(lo, hi + 1):
            acc.append(v)
            yield from rec(i + 1, v, budget - (v - lo), acc)
            acc.pop()

    yield from rec(0, None, max_add, [])


def partitions_of(n: int, max_length: int | None = None, max_part: int | None = None):
    """Partitions of ``n`` in reverse lexicographic order."""
    cap = n if max_part is None else min(n, max_part)
    lim = n if max_length is None else max_length

    def rec(rem, bound, slots):
        if rem == 0:
            yield ()
            return
        if slots == 0:
            return
        for first in range(min(rem, bound), 0, -1):
            for rest in rec(rem - first, first, slots - 1):
                yield (first,) + rest

    yield from rec(n, cap, lim)


# ------------------------------------------------------------------ coefficients


@dataclass(frozen=True)
class QTParams:
    q: float
    t: float

    def __post_init__(self):
        for name in ("q", "t"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")


def _qpoch_finite(a, q, n: int):
    out = 1 + 0 * a  # keeps Fraction inputs exact
    for i in range(n):
        out *= 1 - a * q**i
    return out


def _g(exp_q: int, c, q, t):
    """``f(q^A c) / f(c) = (qc;q)_A / (tc;q)_A`` with ``f(u) = (tu;q)_inf/(qu;q)_inf``."""
    return _qpoch_finite(q * c, q, exp_q) / _qpoch_finite(t * c, q, exp_q)


def _ratio_product(outer, inner, q, t, upto):
    """Shared product structure of psi and phi over ``1 <= i <= j <= upto``.

    The four ``f`` factors of each (i, j) share ``c = t^{j-i}`` so their
    infinite parts cancel, leaving finite q-Pochhammer ratios.
    """
    out = 1
    for i in range(upto):
        for j in range(i, upto):
            c = t ** (j - i)
            if outer == "phi":
                lam, mu = inner
                num = _g(_part(lam, i) - _part(lam, j), c, q, t) * _g(
                    _part(mu, i) - _part(mu, j + 1), c, q, t
                )
            else:
                lam, mu = inner
                num = _g(_part(mu, i) - _part(mu, j), c, q, t) * _g(
                    _part(lam, i) - _part(lam, j + 1), c, q, t
                )
            den = _g(_part(lam, i) - _part(mu, j), c, q, t) * _g(
                _part(mu, i) - _part(lam, j + 1), c, q, t
            )
            out *= num / den
    return out


@lru_cache(maxsize=200_000)
def _psi(lam, mu, q, t):
    return _ratio_product("psi", (lam, mu), q, t, len(mu))


@lru_cache(maxsize=200_000)
def _phi(lam, mu, q, t):
    return _ratio_product("phi", (lam, mu), q, t, len(lam))


def psi_coeff(lam, mu, qt: QTParams):
    """Branching coefficient of P for the horizontal strip ``lam/mu`` (0 otherwise)."""
    lam, mu = as_partition(lam), as_partition(mu)
    if not interlaces(mu, lam):
        return 0
    return _psi(lam, mu, qt.q, qt.t)


def phi_coeff(lam, mu, qt: QTParams):
    """Branching coefficient of Q for the horizontal strip ``lam/mu`` (0 otherwise)."""
    lam, mu = as_partition(lam), as_partition(mu)
    if not interlaces(mu, lam):
        return 0
    return _phi(lam, mu, qt.q, qt.t)


def b_box(lam, box, qt: QTParams):
    a, l = arm(lam, box), leg(lam, box)
    q, t = qt.q, qt.t
    return (1 - q**a * t ** (l + 1)) / (1 - q ** (a + 1) * t**l)


@lru_cache(maxsize=100_000)
def _b_el(lam, q, t):
    conj = conjugate(lam)
    out = 1
    for i, row in enumerate(lam, start=1):
        for j in range(1, row + 1):
            l = conj[j - 1] - i
            if l % 2 == 0:
                a = row - j
                out *= (1 - q**a * t ** (l + 1)) / (1 - q ** (a + 1) * t**l)
    return out


def b_el(mu, qt: QTParams):
    """Product of ``b_mu(box)`` over boxes whose leg length is even."""
    return _b_el(as_partition(mu), qt.q, qt.t)


# ------------------------------------------------------------------ polynomials


class _Chain:
    """Memoised evaluation of chain sums for one tuple of variables.

    ``value(lam, k)`` is the skew function ``lam/base`` in the first ``k``
    variables, peeling the last variable through one horizontal strip.
    """

    def __init__(self, xs, qt: QTParams, kind: str, base: Partition = (), bounded=True):
        self.xs = tuple(xs)
        self.q, self.t = qt.q, qt.t
        self.coeff = _psi if kind == "P" else _phi
        self.base = base
        self.bounded = bounded  # P in k variables vanishes beyond length k
        self.memo: dict = {}

    def value(self, lam: Partition, k: int | None = None):
        if k is None:
            k = len(self.xs)
        key = (lam, k)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if k == 0:
            out = 1 if lam == self.base else 0
        elif self.bounded and len(lam) > k + len(self.base):
            out = 0
        else:
            x = self.xs[k - 1]
            w = sum(lam)
            out = 0
            for mu in strips_below(lam):
                if not _contains(mu, self.base):
                    continue
                sub = self.value(mu, k - 1)
                if sub == 0:
                    continue
                out += self.coeff(lam, mu, self.q, self.t) * x ** (w - sum(mu)) * sub
        self.memo[key] = out
        return out


def _contains(lam: Partition, mu: Partition) -> bool:
    return len(mu) <= len(lam) and all(lam[i] >= mu[i] for i in range(len(mu)))


def macdonald_p(lam, xs, qt: QTParams):
    """Macdonald ``P_lam(x_1, ..., x_n)``; zero when ``l(lam) > n``."""
    return _Chain(xs, qt, "P").value(as_partition(lam))


def macdonald_q(lam, xs, qt: QTParams):
    """Macdonald ``Q_lam(x_1, ..., x_n)``."""
    return _Chain(xs, qt, "Q").value(as_partition(lam))


def skew_p(lam, mu, xs, qt: QTParams):
    lam, mu = as_partition(lam), as_partition(mu)
    if not _contains(lam, mu):
        return 0
    return _Chain(xs, qt, "P", base=mu).value(lam)


def skew_q(lam, mu, xs, qt: QTParams):
    lam, mu = as_partition(lam), as_partition(mu)
    if not _contains(lam, mu):
        return 0
    return _Chain(xs, qt, "Q", base=mu).value(lam)


class _EChain:
    """Memoised ``E_lam(x_1..x_k)``: peel ``x_1`` with a Q-strip, end at b^el on dual-even shapes."""

    def __init__(self, xs, qt: QTParams):
        self.xs = tuple(xs)
        self.q, self.t = qt.q, qt.t
        self.memo: dict = {}

    def value(self, lam: Partition, k: int = 0):
        key = (lam, k)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if k == len(self.xs):
            out = _b_el(lam, self.q, self.t) if is_dual_even(lam) else 0
        else:
            x = self.xs[k]
            w = sum(lam)
            out = 0
            for mu in strips_below(lam):
                sub = self.value(mu, k + 1)
                if sub == 0:
                    continue
                out += _phi(lam, mu, self.q, self.t) * x ** (w - sum(mu)) * sub
        self.memo[key] = out
        return out


def e_fn(lam, xs, qt: QTParams):
    """The function ``E_lam`` evaluated at usual variables ``xs`` (possibly none)."""
    return _EChain(xs, qt).value(as_partition(lam))


# --------------------------------------------------------------- normalizations


@dataclass(frozen=True)
class Specialization:
    """Nonnegative specialization with usual (alpha), dual (beta) and Plancherel (gamma) parts."""

    alphas: tuple = ()
    betas: tuple = ()
    gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "betas", tuple(self.betas))
        if any(a < 0 for a in self.alphas) or any(b < 0 for b in self.betas) or self.gamma < 0:
            raise ValueError("specialization parameters must be nonnegative")


def _phi_scalar(x, qt: QTParams) -> float:
    """``(tx;q)_inf / (x;q)_inf``."""
    if x >= 1:
        raise ValueError(f"product diverges at argument {x}")
    return q_pochhammer(qt.t * x, qt.q) / q_pochhammer(x, qt.q)


def _dual_pair(x, qt: QTParams) -> float:
    """``(qx;t)_inf / (x;t)_inf`` (roles of q and t swapped)."""
    if x >= 1:
        raise ValueError(f"product diverges at argument {x}")
    return q_pochhammer(qt.q * x, qt.t) / q_pochhammer(x, qt.t)


def pi_norm(spec_a: Specialization, spec_b: Specialization, qt: QTParams) -> float:
    """Cauchy normalisation ``Pi(rho_a; rho_b) = sum_lam P_lam(rho_a) Q_lam(rho_b)`` in closed form."""
    out = 1.0
    ratio = (1 - qt.q) / (1 - qt.t)
    for i, a in enumerate(spec_a.alphas):
        for j, b in enumerate(spec_b.alphas):
            if a * b >= 1:
                raise ValueError(f"Pi diverges for alpha pair ({i}, {j}): {a}*{b} >= 1")
            out *= _phi_scalar(a * b, qt)
    for a in spec_a.alphas:
        for b in spec_b.betas:
            out *= 1 + a * b
    for a in spec_a.betas:
        for b in spec_b.alphas:
            out *= 1 + a * b
    for i, a in enumerate(spec_a.betas):
        for j, b in enumerate(spec_b.betas):
            if a * b >= 1:
                raise ValueError(f"Pi diverges for beta pair ({i}, {j}): {a}*{b} >= 1")
            out *= _dual_pair(a * b, qt)
    out *= math.exp(spec_a.gamma * sum(spec_b.alphas) + spec_b.gamma * sum(spec_a.alphas))
    out *= math.exp(ratio * (spec_a.gamma * sum(spec_b.betas) + spec_b.gamma * sum(spec_a.betas)))
    out *= math.exp(ratio * spec_a.gamma * spec_b.gamma)
    return out


def phi_norm(xs, qt: QTParams) -> float:
    """Littlewood normalisation ``prod_{i<j} phi(x_i x_j)``."""
    out = 1.0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if xs[i] * xs[j] >= 1:
                raise ValueError(f"Phi diverges for pair ({i}, {j})")
            out *= _phi_scalar(xs[i] * xs[j], qt)
    return out


# --------------------------------------------------------------------- measure


@dataclass(frozen=True)
class MeasureSpec:
    """Half-space Macdonald measure with usual variables ``up`` and a diagonal specialization."""

    up: tuple
    diag: Specialization = field(default_factory=Specialization)
    qt: QTParams = field(default_factory=lambda: QTParams(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "up", tuple(self.up))
        if any(not 0 < a < 1 for a in self.up):
            raise ValueError("usual variables must lie in (0, 1)")
        for a in self.up:
            for b in self.diag.alphas:
                if a * b >= 1:
                    raise ValueError(f"Pi diverges: {a}*{b} >= 1")


def _require_usual(diag: Specialization):
    if diag.gamma > 0 or diag.betas:
        raise UnsupportedSpecialization(
            "exact E evaluation supports usual variables only (gamma = 0, no betas)"
        )


def measure_normalization(m: MeasureSpec) -> float:
    """``Pi(up; diag) * Phi(up)``."""
    return pi_norm(Specialization(m.up), m.diag, m.qt) * phi_norm(m.up, m.qt)


class _MeasureEvaluator:
    def __init__(self, m: MeasureSpec):
        _require_usual(m.diag)
        self.m = m
        self.p = _Chain(m.up, m.qt, "P")
        self.e = _EChain(m.diag.alphas, m.qt)
        self.norm = measure_normalization(m)

    def weight(self, lam: Partition) -> float:
        if len(lam) > len(self.m.up):
            return 0.0
        p = self.p.value(lam)
        if p == 0:
            return 0.0
        return float(p * self.e.value(lam))


def halfspace_pmf(lam, m: MeasureSpec) -> float:
    """Exact probability ``P_lam(up) E_lam(diag) / (Pi * Phi)``."""
    ev = _MeasureEvaluator(m)
    return ev.weight(as_partition(lam)) / ev.norm


def enumerate_measure(m: MeasureSpec, mass_target: float, max_weight: int = 80):
    """Partitions in increasing weight with their probabilities until ``mass_target`` is reached.

    Raises
    ------
    TruncationError
        If weight ``max_weight`` is exhausted first; ``.mass`` holds the mass collected.
    """
    if not 0 <= mass_target < 1:
        raise ValueError("mass_target must lie in [0, 1)")
    ev = _MeasureEvaluator(m)
    out, acc = [], 0.0
    n = len(m.up)
    for w in range(max_weight + 1):
        for lam in partitions_of(w, max_length=n):
            p = ev.weight(lam) / ev.norm
            if p > 0:
                out.append((lam, p))
                acc += p
        if acc >= mass_target:
            return out
    raise TruncationError(f"collected mass {acc} below target {mass_target}", acc)


class LittlewoodCheck(NamedTuple):
    lhs_truncated: float
    rhs: float
    gap: float


def littlewood_weight_sums(m: MeasureSpec, weight_cap: int) -> list:
    """Per-weight sums ``sum_{|lam| = w} P_lam(up) E_lam(diag)`` for ``w = 0..weight_cap``."""
    ev = _MeasureEvaluator(m)
    return [
        sum(ev.weight(lam) for lam in partitions_of(w, max_length=len(m.up)))
        for w in range(weight_cap + 1)
    ]


def littlewood_tail_bound(sums: list) -> float:
    """Geometric tail estimate ``S_cap * r / (1 - r)`` from the decay of the last weight sums.

    ``r`` is the largest ratio of consecutive sums over the last quarter of the
    range; returns ``inf`` when the sums are not visibly decaying.
    """
    tail = [s for s in sums[len(sums) * 3 // 4:] if s > 0]
    if len(tail) < 2:
        return 0.0 if sums and sums[-1] == 0 else math.inf
    r = max(b / a for a, b in zip(tail, tail[1:]))
    if r >= 1:
        return math.inf
    return tail[-1] * r / (1 - r)


def verify_littlewood(m: MeasureSpec, weight_cap: int) -> LittlewoodCheck:
    """Truncated generalized Littlewood sum against its product form."""
    lhs = float(sum(littlewood_weight_sums(m, weight_cap)))
    rhs = measure_normalization(m)
    return LittlewoodCheck(lhs, rhs, abs(lhs - rhs))


def cauchy_sum(xs, ys, qt: QTParams, weight_cap: int) -> float:
    """Truncated ``sum_{|lam| <= cap} P_lam(xs) Q_lam(ys)``."""
    p, qq = _Chain(xs, qt, "P"), _Chain(ys, qt, "Q")
    n = min(len(xs), len(ys))
    return float(
        sum(
            p.value(lam) * qq.value(lam)
            for w in range(weight_cap + 1)
            for lam in partitions_of(w, max_length=n)
        )
    )


def exact(qt: QTParams) -> QTParams:
    """Rational copy of ``qt`` for exact evaluation."""
    return QTParams(Fraction(qt.q).limit_denominator(10**9), Fraction(qt.t).limit_denominator(10**9))
