"""Exact samplers for the half-space models and a replica Monte Carlo harness.

Everything that draws randomness takes an explicit ``numpy.random.Generator``.
Samplers that return many replicas at once are vectorised over the replica
axis; per-replica Python loops are used only where the state shape varies.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from . import qdist
from .qspecial import INFINITY, check_q, log_qq_table
from .symfunc import as_partition

PUSHBLOCK_TAIL = 1e-12


# ---------------------------------------------------------------- MC harness


class MCResult(NamedTuple):
    mean: float
    stderr: float
    count: int
    n_nonfinite: int = 0


MC_CHUNK = 20_000


def monte_carlo(
    estimator: Callable[[np.random.Generator, int], np.ndarray],
    replicas: int,
    seed: int,
    threads: int = 1,
    chunk: int = MC_CHUNK,
) -> MCResult:
    """Mean and standard error of ``estimator`` over ``replicas`` independent replicas.

    Replicas are processed in fixed-size chunks; chunk ``c`` draws from
    ``split(seed, c)``. Because the chunking does not depend on ``threads``
    and partial sums are combined in chunk order, results are identical for
    any thread count. Non-finite replica values are dropped with a warning.
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    sizes = [min(chunk, replicas - s) for s in range(0, replicas, chunk)]

    def run(c):
        vals = np.asarray(estimator(qdist.split(seed, c), sizes[c]), dtype=float)
        if vals.shape != (sizes[c],):
            raise ValueError("estimator must return one value per replica")
        ok = np.isfinite(vals)
        v = vals[ok]
        return len(v), float(np.sum(v)), v, int((~ok).sum())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(c) for c in range(len(sizes))]
    count = sum(p[0] for p in parts)
    bad = sum(p[3] for p in parts)
    if bad:
        warnings.warn(f"monte_carlo: excluded {bad} non-finite replica values", RuntimeWarning)
    if count < 2:
        raise ValueError("fewer than 2 finite replica values")
    mean = sum(p[1] for p in parts) / count
    ss = sum(float(np.sum((p[2] - mean) ** 2)) for p in parts)
    return MCResult(mean, math.sqrt(ss / (count - 1) / count), count, bad)


# ------------------------------------------------------------------- polymer


@dataclass(frozen=True)
class PolymerParams:
    """Half-space log-gamma polymer on ``{(i, j): 1 <= j <= i}`` up to ``(t, n)``."""

    alphas: tuple
    alpha0: float
    t: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not 1 <= self.n <= self.t:
            raise ValueError("need 1 <= n <= t")
        if len(self.alphas) < self.t:
            raise ValueError(f"need {self.t} alphas, got {len(self.alphas)}")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("alphas must be positive")
        if any(a + self.alpha0 <= 0 for a in self.alphas[: self.n]):
            raise ValueError("need alpha_i + alpha0 > 0")

    @classmethod
    def homogeneous(cls, alpha: float, alpha0: float, t: int, n: int):
        return cls((alpha,) * t, alpha0, t, n)

    def shapes(self) -> np.ndarray:
        """Inverse-Gamma shapes ``theta[i, j]`` (1-based) of the weights."""
        a = np.asarray(self.alphas[: self.t])
        th = a[:, None] + a[None, :]
        np.fill_diagonal(th, self.alpha0 + a)
        out = np.full((self.t + 1, self.t + 1), np.nan)
        out[1:, 1:] = th
        return out


def moment_guard(k: int, p: PolymerParams):
    """Refuse moments of order ``k`` that do not exist.

    ``E[Z^k]`` is finite only when ``k < min(2 alpha_min, alpha0 + alpha_min)``.
    """
    a_min = min(p.alphas[: p.t])
    bound = min(2 * a_min, p.alpha0 + min(p.alphas[: p.n]))
    if k >= bound:
        raise ValueError(
            f"E[Z^{k}] is infinite: moments exist only for k < min(2*alpha_min, "
            f"alpha0 + alpha_min) = {bound}"
        )


def loggamma_table(p: PolymerParams, rng: np.random.Generator) -> np.ndarray:
    """One realisation of ``Z(i, j)`` for ``1 <= j <= min(i, n)``, ``i <= t``.

    Returns an array of shape ``(t+1, n+1)``; entries outside the domain are 0.
    """
    th = p.shapes()
    Z = np.zeros((p.t + 1, p.n + 1))
    for i in range(1, p.t + 1):
        for j in range(1, min(i, p.n) + 1):
            w = 1.0 / rng.gamma(th[i, j])
            if i == j == 1:
                Z[i, j] = w
            elif i == j:
                Z[i, j] = w * Z[i, j - 1]
            else:
                Z[i, j] = w * (Z[i - 1, j] + Z[i, j - 1])
    return Z


def loggamma_log_partition(p: PolymerParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """``log Z(t, n)`` for ``size`` independent replicas.

    Sweeps anti-diagonals ``d = i + j`` in log space keeping only the previous
    diagonal, vectorised over replicas and cells.
    """
    th = p.shapes()
    prev = np.full((size, p.n + 1), -np.inf)
    prev[:, 0] = 0.0  # seeds Z(1,1) = w_11
    for d in range(2, p.t + p.n + 1):
        lo, hi = max(1, d - p.t), min(p.n, d // 2)
        new = np.full_like(prev, -np.inf)
        if lo <= hi:
            j = np.arange(lo, hi + 1)
            shapes = th[d - j, j]
            logw = -np.log(rng.gamma(np.broadcast_to(shapes, (size, len(j)))))
            new[:, lo:hi + 1] = logw + np.logaddexp(prev[:, lo:hi + 1], prev[:, lo - 1:hi])
        prev = new
    return prev[:, p.n]


def loggamma_mean_table(p: PolymerParams) -> np.ndarray:
    """Exact ``E[Z(i, j)]`` from independence of weights: ``m_ij (E Z(i-1,j) + E Z(i,j-1))``."""
    th = p.shapes()
    if np.nanmin(th[1:, 1:]) <= 1:
        raise ValueError("mean is infinite: every inverse-Gamma shape must exceed 1")
    m = 1.0 / (th - 1.0)
    E = np.zeros((p.t + 1, p.n + 1))
    for i in range(1, p.t + 1):
        for j in range(1, min(i, p.n) + 1):
            if i == j == 1:
                E[i, j] = m[1, 1]
            elif i == j:
                E[i, j] = m[i, j] * E[i, j - 1]
            else:
                E[i, j] = m[i, j] * (E[i - 1, j] + E[i, j - 1])
    return E


def loggamma_log_mean(p: PolymerParams) -> float:
    """``log E[Z(t, n)]`` by the mean recursion run in log space.

    Needed for large ``(t, n)`` where the mean under- or overflows.
    """
    th = p.shapes()
    if np.nanmin(th[1:, 1:]) <= 1:
        raise ValueError("mean is infinite: every inverse-Gamma shape must exceed 1")
    lm = -np.log(th - 1.0)
    L = np.full((p.t + 1, p.n + 1), -np.inf)
    for i in range(1, p.t + 1):
        for j in range(1, min(i, p.n) + 1):
            if i == j == 1:
                L[i, j] = lm[1, 1]
            elif i == j:
                L[i, j] = lm[i, j] + L[i, j - 1]
            else:
                L[i, j] = lm[i, j] + np.logaddexp(L[i - 1, j], L[i, j - 1])
    return float(L[p.t, p.n])


# ------------------------------------------------------------- push-block


def _check_t0_params(*xs):
    for x in xs:
        if x <= 0:
            raise ValueError(f"single-variable specializations must be positive, got {x}")


def boundary_pushblock_sample(kappa, a_next: float, a0: float, q: float, rng):
    """Boundary move ``kappa -> pi`` at t = 0 with weight ``P_{pi/kappa}(a_next) E_pi(a0)``.

    At t = 0 the weight factorises over coordinates: ``pi_1 - kappa_1`` is
    q-geometric with parameter ``a0 a_next`` and, for ``2 <= i <= l(kappa)+1``,
    ``pi_i - kappa_i`` is q-inverse Gaussian with ``m = kappa_{i-1} - kappa_i``
    and ``theta = a0^{(-1)^{i-1}} a_next``. The chain dynamic programme over
    coordinates is therefore trivial and each part is drawn directly.
    """
    kappa = as_partition(kappa)
    _check_t0_params(a_next, a0)
    q = check_q(q, infinite=True)
    if a0 * a_next >= 1:
        raise ValueError(f"boundary step needs a0 * a_next < 1, got {a0 * a_next}")
    k = len(kappa)
    ext = kappa + (0,)
    geom = qdist.q_inv_gauss_cdf(INFINITY, a0 * a_next, q)
    out = [ext[0] + int(qdist.sample_from_cdf(geom, rng))]
    for i in range(2, k + 2):
        theta = (a0 if i % 2 == 1 else 1.0 / a0) * a_next
        m = ext[i - 2] - ext[i - 1]
        out.append(ext[i - 1] + int(qdist.sample_from_cdf(qdist.q_inv_gauss_cdf(m, theta, q), rng)))
    return as_partition(out)


class _BulkTable:
    """Chain DP for ``P_{pi/kappa}(a_col) Q_{pi/nu}(a_row)`` at t = 0.

    Coordinates ``pi_1..pi_L`` with ``L = max(l(kappa), l(nu)) + 1`` interact
    only through the nearest-neighbour factor ``(q;q)_{pi_i - pi_{i+1}}``.
    Backward messages are built in log space; ``pi_1`` is truncated once the
    geometric tail bound drops below ``PUSHBLOCK_TAIL``.
    """

    def __init__(self, kappa, nu, a_row, a_col, q):
        L = max(len(kappa), len(nu)) + 1
        k = list(kappa) + [0] * (L + 1 - len(kappa))
        v = list(nu) + [0] * (L + 1 - len(nu))
        ab = a_row * a_col
        if ab >= 1:
            raise ValueError(f"bulk step needs a_row * a_col < 1, got {ab}")
        lab = math.log(ab)
        lo = [max(k[i], v[i]) for i in range(L)]
        hi = [None] + [min(k[i - 1], v[i - 1]) for i in range(1, L)]
        # pi_1 range: extend until the tail bound is met
        base = lo[0]
        K0 = 1
        while ab / (1 - q**K0) ** 2 >= 0.999:
            K0 += 1
        r = ab / (1 - q**K0) ** 2
        size = K0 + 64
        while True:
            hi[0] = base + size
            lq = log_qq_table(q, hi[0] + 1)
            msgs = self._messages(k, v, lo, hi, lab, lq, L)
            m1 = msgs[0]
            tail = m1[-1] - np.logaddexp.reduce(m1) + math.log(r / (1 - r))
            if tail < math.log(PUSHBLOCK_TAIL):
                break
            size *= 2
        self.lo = lo
        self.msgs = msgs
        self.lq = lq
        self.L = L
        self.cdf1 = _cdf_from_log(m1)

    def _messages(self, k, v, lo, hi, lab, lq, L):
        # unary pieces: psi gives 1/((q;q)_{pi_i-k_i}(q;q)_{k_i-pi_{i+1}}), phi gives
        # 1/(q;q)_{pi_1-v_1} and 1/((q;q)_{v_i-pi_{i+1}}(q;q)_{pi_{i+1}-v_{i+1}})
        msgs = [None] * L
        for i in range(L - 1, -1, -1):
            x = np.arange(lo[i], hi[i] + 1)
            u = x * lab - lq[x - k[i]]
            if i == 0:
                u = u - lq[x - v[0]]
            else:
                u = u - lq[k[i - 1] - x] - lq[v[i - 1] - x] - lq[x - v[i]]
            if i + 1 < L:
                y = np.arange(lo[i + 1], hi[i + 1] + 1)
                pair = lq[np.maximum(x[:, None] - y[None, :], 0)]
                pair = np.where(x[:, None] >= y[None, :], pair, -np.inf)
                u = u + np.logaddexp.reduce(pair + msgs[i + 1][None, :], axis=1)
            else:
                u = u + lq[x]  # pairing with pi_{L+1} = 0
            msgs[i] = u
        return msgs

    def sample(self, rng) -> tuple:
        x = self.lo[0] + int(qdist.sample_from_cdf(self.cdf1, rng))
        out = [x]
        for i in range(1, self.L):
            lo_i = self.lo[i]
            y = np.arange(lo_i, lo_i + len(self.msgs[i]))
            logw = self.msgs[i] + np.where(x >= y, self.lq[np.maximum(x - y, 0)], -np.inf)
            x = lo_i + int(qdist.sample_from_cdf(_cdf_from_log(logw), rng))
            out.append(x)
        return as_partition(out)


def _cdf_from_log(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - np.max(logw))
    c = np.cumsum(w)
    return c / c[-1]


@lru_cache(maxsize=20_000)
def _bulk_table(kappa, nu, a_row, a_col, q):
    return _BulkTable(kappa, nu, a_row, a_col, q)


def bulk_pushblock_sample(kappa, nu, a_row: float, a_col: float, q: float, rng):
    """Bulk move at t = 0: ``pi`` with weight proportional to ``P_{pi/kappa}(a_col) Q_{pi/nu}(a_row)``.

    The weight is normalised over ``pi`` for fixed ``(kappa, nu)``; by the skew
    Cauchy identity this choice maps the process to the next one regardless
    of the partition at the opposite corner.
    """
    kappa, nu = as_partition(kappa), as_partition(nu)
    _check_t0_params(a_row, a_col)
    q = check_q(q, infinite=True)
    if len(kappa) > len(nu) + 1 or len(nu) > len(kappa) + 1:
        raise ValueError("kappa and nu must share a common predecessor")
    return _bulk_table(kappa, nu, float(a_row), float(a_col), q).sample(rng)


def pushblock_lambda(a, a0: float, q: float, t: int, n: int, rng) -> tuple:
    """Grow ``lambda^{(t,n)}`` from empty partitions by boundary and bulk moves.

    ``lambda^{(i,j)}`` has up variables ``a_1..a_j`` and diagonal variables
    ``a0, a_{j+1}..a_i``.
    """
    if not 1 <= n <= t or len(a) < t:
        raise ValueError("need 1 <= n <= t and t rapidities")
    lam = {}
    for i in range(1, t + 1):
        for j in range(1, min(i, n) + 1):
            if j == i:
                lam[i, j] = boundary_pushblock_sample(lam.get((i, j - 1), ()), a[i - 1], a0, q, rng)
            else:
                lam[i, j] = bulk_pushblock_sample(
                    lam.get((i, j - 1), ()), lam[i - 1, j], a[i - 1], a[j - 1], q, rng
                )
    return lam[t, n]


def pushblock_samples(a, a0, q, t, n, rng, size: int) -> list:
    return [pushblock_lambda(a, a0, q, t, n, rng) for _ in range(size)]


# ----------------------------------------------------------- particle systems


@dataclass
class ParticleState:
    """Positions of particles 1..N (``positions[:, n-1]``) over replicas after ``time`` steps."""

    positions: np.ndarray
    time: int


def _grouped_draw(keys: np.ndarray, table_fn, rng, out: np.ndarray):
    """Fill ``out`` by inverse-CDF draws from ``table_fn(*key)`` grouped on unique keys."""
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    u = rng.random(len(out))
    for g, key in enumerate(uniq):
        sel = inv == g
        cdf = table_fn(*key)
        out[sel] = np.minimum(np.searchsorted(cdf, u[sel], side="right"), len(cdf) - 1)
    return out


def qpush_initial(replicas: int) -> ParticleState:
    return ParticleState(np.zeros((replicas, 0), dtype=np.int64), 0)


def qpush_creation_step(s: ParticleState, a, a0: float, q: float, rng) -> ParticleState:
    """One step ``time -> time+1`` of geometric q-PushTASEP with particle creation.

    Particle ``n`` moves by ``V_n + W_n`` with ``V_n ~ qGeom(a_n a_{time+1})``
    and ``W_n`` the push from particle ``n-1``, drawn from the inverted
    q-BetaBinomial with ``a = gap_n``, ``b = infinity`` and ``y`` the
    displacement of particle ``n-1`` during this step. A new particle is then
    created at ``x_time(time+1) + qGeom(a0 a_{time+1}) + 1``.
    """
    q = check_q(q, infinite=True)
    T = s.time
    x = s.positions
    R = x.shape[0]
    an = a[T]
    new = np.empty((R, T + 1), dtype=np.int64)
    prev_old = np.zeros(R, dtype=np.int64)
    prev_new = np.zeros(R, dtype=np.int64)
    for n in range(1, T + 1):
        V = qdist.q_geom_sample(a[n - 1] * an, q, rng, R)
        gap = x[:, n - 1] - prev_old - 1
        y = prev_new - prev_old
        W = np.zeros(R, dtype=np.int64)
        moved = y > 0
        if moved.any():
            keys = np.stack([gap[moved], y[moved]], axis=1)
            Wm = np.empty(moved.sum(), dtype=np.int64)
            _grouped_draw(keys, lambda g, yy: qdist.q_beta_binomial_inverted_cdf(q, int(g), INFINITY, int(yy)), rng, Wm)
            W[moved] = Wm
        prev_old = x[:, n - 1]
        new[:, n - 1] = x[:, n - 1] + V + W
        prev_new = new[:, n - 1]
    if a0 * an >= 1:
        raise ValueError("creation needs a0 * a_{t+1} < 1")
    new[:, T] = (new[:, T - 1] if T else 0) + qdist.q_geom_sample(a0 * an, q, rng, R) + 1
    assert np.all(np.diff(new, axis=1) > 0) and np.all(new[:, 0] > 0)
    return ParticleState(new, T + 1)


def qpush_run(a, a0, q, steps: int, rng, replicas: int) -> ParticleState:
    if len(a) < steps:
        raise ValueError(f"need one rate a_j per step: got {len(a)} rates for {steps} steps")
    s = qpush_initial(replicas)
    for _ in range(steps):
        s = qpush_creation_step(s, a, a0, q, rng)
    return s


def qtasep_initial(replicas: int) -> ParticleState:
    return ParticleState(np.zeros((replicas, 0), dtype=np.int64), 0)


def qtasep_activation_step(s: ParticleState, a, a0: float, q: float, rng) -> ParticleState:
    """One step ``time -> time+1`` of geometric q-TASEP with activation.

    Active particles jump in parallel by ``phi_{q, a_n a_{time+1}, 0}(.|gap_n)``
    (q-geometric for the leader). Particle ``time+1``, frozen at ``-(time+1)``,
    then activates at ``-(time+1) + W`` with ``W`` q-inverse Gaussian,
    ``m = x_time(time+1) + time`` and ``theta = a0^{(-1)^time} a_{time+1}``.
    """
    q = check_q(q, infinite=True)
    T = s.time
    x = s.positions
    R = x.shape[0]
    an = a[T]
    new = np.empty((R, T + 1), dtype=np.int64)
    for n in range(1, T + 1):
        xi = a[n - 1] * an
        if n == 1:
            V = qdist.q_geom_sample(xi, q, rng, R)
        else:
            y = x[:, n - 2] - x[:, n - 1] - 1
            V = np.empty(R, dtype=np.int64)
            _grouped_draw(y[:, None], lambda yy: qdist.truncated_geom_cdf(q, xi, int(yy)), rng, V)
        new[:, n - 1] = x[:, n - 1] + V
    theta = (a0 if T % 2 == 0 else 1.0 / a0) * an
    if T == 0:
        if theta >= 1:
            raise ValueError("first activation needs a0 * a_1 < 1")
        W = qdist.q_geom_sample(theta, q, rng, R)
    else:
        m = new[:, T - 1] + T
        W = np.empty(R, dtype=np.int64)
        _grouped_draw(m[:, None], lambda mm: qdist.q_inv_gauss_cdf(int(mm), theta, q), rng, W)
    new[:, T] = -T - 1 + W
    assert np.all(np.diff(new, axis=1) < 0)
    return ParticleState(new, T + 1)


def qtasep_run(a, a0, q, steps: int, rng, replicas: int) -> ParticleState:
    if len(a) < steps:
        raise ValueError(f"need one rate a_j per step: got {len(a)} rates for {steps} steps")
    s = qtasep_initial(replicas)
    for _ in range(steps):
        s = qtasep_activation_step(s, a, a0, q, rng)
    return s


# ----------------------------------------------------------- six-vertex


@dataclass(frozen=True)
class SixVertexParams:
    """Rapidities ``a_1..a_N`` and the Hall-Littlewood parameter ``t_hl``."""

    a: tuple
    t_hl: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if not 0 <= self.t_hl < 1:
            raise ValueError("t_hl must lie in [0, 1)")
        if any(not 0 < v < 1 for v in self.a):
            raise ValueError("rapidities must lie in (0, 1)")


def vertex_probabilities(b: float, t: float) -> dict:
    """Bulk transition probabilities keyed by (input, output); ``b = a_x a_y``."""
    d = 1 - t * b
    return {
        ("h", "right"): (1 - b) / d,
        ("h", "up"): (1 - t) * b / d,
        ("v", "up"): t * (1 - b) / d,
        ("v", "right"): (1 - t) / d,
    }


def sixvertex_sample(p: SixVertexParams, N: int, rng, size: int = 1) -> np.ndarray:
    """Sample the half-quadrant stochastic six-vertex model on ``1 <= x <= y <= N``.

    Every ``(1, y)`` receives a path from the left. A bulk vertex ``x < y``
    with rapidity product ``b = a_x a_y`` routes a single incoming path by the
    stochastic weights of :func:`vertex_probabilities`; two incoming paths
    exit both ways. At a corner ``(x, x)`` an incoming path is absorbed, and
    an empty corner emits a path upwards.

    Returns
    -------
    ndarray of int16, shape ``(size, N+1, N+1)``
        ``h[:, x, y]`` is the number of paths leaving row ``y`` upwards at
        columns ``<= x``; zero outside the domain.
    """
    if len(p.a) < N:
        raise ValueError(f"need {N} rapidities")
    t = p.t_hl
    h = np.zeros((size, N + 1, N + 1), dtype=np.int16)
    up_prev = np.zeros((size, N + 1), dtype=bool)  # vertical edges entering row y
    for y in range(1, N + 1):
        up_cur = np.zeros((size, N + 1), dtype=bool)
        hin = np.ones(size, dtype=bool)
        for x in range(1, y + 1):
            if x == y:
                up_cur[:, x] = ~hin
            else:
                vin = up_prev[:, x]
                b = p.a[x - 1] * p.a[y - 1]
                pr = vertex_probabilities(b, t)
                u = rng.random(size)
                only_h = hin & ~vin
                only_v = vin & ~hin
                both = hin & vin
                go_up = both | (only_h & (u < pr["h", "up"])) | (only_v & (u < pr["v", "up"]))
                go_right = both | (only_h & ~go_up) | (only_v & ~go_up)
                up_cur[:, x] = go_up
                hin = go_right
        h[:, 1:y + 1, y] = np.cumsum(up_cur[:, 1:y + 1], axis=1)
        up_prev = up_cur
    return h


def sixvertex_corner_enumeration(a, t_hl: float, x: int, y: int) -> dict:
    """Exact law of ``h(x, y)`` by enumerating every vertex outcome (small grids only)."""
    cells = [(cx, cy) for cy in range(1, y + 1) for cx in range(1, cy + 1)]
    dist: dict = {}

    def rec(idx, ups, rights, prob):
        if prob == 0:
            return
        if idx == len(cells):
            hv = sum(ups.get((i, y), 0) for i in range(1, x + 1))
            dist[hv] = dist.get(hv, 0.0) + prob
            return
        cx, cy = cells[idx]
        hin = 1 if cx == 1 else rights[(cx - 1, cy)]
        vin = ups.get((cx, cy - 1), 0) if cx < cy else 0
        outcomes = []
        if cx == cy:
            outcomes = [((1 - hin, 0), 1.0)]
        elif hin and vin:
            outcomes = [((1, 1), 1.0)]
        elif not hin and not vin:
            outcomes = [((0, 0), 1.0)]
        else:
            pr = vertex_probabilities(a[cx - 1] * a[cy - 1], t_hl)
            key = "h" if hin else "v"
            outcomes = [((1, 0), pr[key, "up"]), ((0, 1), pr[key, "right"])]
        for (u, r), pw in outcomes:
            ups[(cx, cy)], rights[(cx, cy)] = u, r
            rec(idx + 1, ups, rights, prob * pw)
        del ups[(cx, cy)], rights[(cx, cy)]

    rec(0, {}, {}, 1.0)
    return dist


# ------------------------------------------------------------------ ASEP


@dataclass
class AsepState:
    occupation: np.ndarray
    time: float


ASEP_MAX_WINDOW = 1 << 20


def asep_simulate(t_hl: float, horizon: float, rng, window: int = 32) -> AsepState:
    """Half-line ASEP from empty initial data up to time ``horizon``.

    Rates: right jumps 1, left jumps ``t_hl``, injection at site 1 with rate
    1/2, removal from site 1 with rate ``t_hl / 2``. Exact event-driven
    simulation; the window doubles once a particle enters its last 10%.
    """
    if not 0 <= t_hl < 1:
        raise ValueError("t_hl must lie in [0, 1)")
    eta = np.zeros(window, dtype=np.int8)  # eta[i] is site i+1
    time = 0.0
    while True:
        right = (eta[:-1] == 1) & (eta[1:] == 0)
        left = (eta[1:] == 1) & (eta[:-1] == 0)
        n_r, n_l = int(right.sum()), int(left.sum())
        boundary = 0.5 if eta[0] == 0 else t_hl / 2
        total = n_r + t_hl * n_l + boundary
        time += rng.exponential(1.0 / total)
        if time > horizon:
            break
        u = rng.random() * total
        if u < n_r:
            i = np.flatnonzero(right)[int(u)]
            eta[i], eta[i + 1] = 0, 1
        elif u < n_r + t_hl * n_l:
            i = np.flatnonzero(left)[min(int((u - n_r) / t_hl), n_l - 1)]
            eta[i], eta[i + 1] = 1, 0
        else:
            eta[0] = 1 - eta[0]
        if eta[-max(1, len(eta) // 10):].any():
            if 2 * len(eta) > ASEP_MAX_WINDOW:
                raise MemoryError("ASEP window exceeded its hard cap")
            eta = np.concatenate([eta, np.zeros(len(eta), dtype=np.int8)])
    return AsepState(eta, horizon)


def asep_currents(state: AsepState, xs) -> np.ndarray:
    """``N_x = sum_{i >= x} eta_i`` for each ``x`` in ``xs``."""
    tail = np.cumsum(state.occupation[::-1])[::-1]
    return np.array([tail[x - 1] if x - 1 < len(tail) else 0 for x in xs])
