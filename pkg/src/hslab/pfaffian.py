"""Pfaffians, Fredholm Pfaffians and the GOE/GSE Tracy-Widom distributions.

Kernel entries are double contour integrals over two wedges that leave the
point 1 at angles +-pi/3. On the wedge nodes the integrand factorizes as
``E_x[a] G[a, b] E_y[b]`` with ``E_x[a] = exp(z_a^3/3 - x z_a)``, so a whole
kernel matrix on an ``N``-point grid costs two matrix products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .integrals import wedge

X_MIN, X_MAX = -6.0, 4.0
DEFAULT_NODES = 80
SCHEME_TOL = 1e-4
# arms end where |exp(z^3/3)| has fallen below 1e-16 for every x in range
ARM_CUT = 7.0
WEDGE_NODES = 224


class ScopeError(ValueError):
    """Argument outside the supported range."""


class ConsistencyError(RuntimeError):
    """Two evaluation schemes disagree."""


# ------------------------------------------------------------------ Pfaffian


def skew(A) -> np.ndarray:
    """Validate and symmetrize a skew matrix: ``(A - A^T) / 2``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A + A.T)) > 1e-12 * scale:
        raise ValueError("matrix is not skew-symmetric")
    return 0.5 * (A - A.T)


def pfaffian(A):
    """Pfaffian by skew Gaussian elimination with partial pivoting.

    Each step pivots the largest entry of the current column into the
    sub-diagonal slot (recording the sign of the swap) and eliminates with a
    rank-two skew update, as in the Parlett-Reid reduction.
    """
    A = skew(A)
    n = A.shape[0]
    if n % 2:
        raise ValueError("Pfaffian needs an even dimension")
    A = A.astype(complex if np.iscomplexobj(A) else float, copy=True)
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return 0.0 * pf
        pf = pf * A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def pfaffian_expansion(A):
    """Pfaffian by expansion along the first row (oracle, ``n <= 10``)."""
    A = skew(A)
    n = A.shape[0]
    if n % 2:
        raise ValueError("Pfaffian needs an even dimension")
    if n > 10:
        raise ValueError("expansion is limited to n <= 10")

    def rec(idx):
        if not idx:
            return 1.0
        i, rest = idx[0], idx[1:]
        total = 0.0
        for pos, j in enumerate(rest):
            total = total + (-1) ** pos * A[i, j] * rec(rest[:pos] + rest[pos + 1:])
        return total

    return rec(tuple(range(n)))


# ------------------------------------------------------ Fredholm Pfaffians


@dataclass(frozen=True)
class Kernel2x2:
    """Skew 2x2 kernel given by a callable returning four matrices on a grid.

    ``blocks(x, y)`` takes two 1-d arrays and returns ``(K11, K12, K21, K22)``
    with shape ``(len(x), len(y))``. ``K21(x, y) = -K12(y, x)`` and the
    diagonal blocks are antisymmetric. A jump term ``jump22 * sgn(x - y)``
    in ``K22`` is kept out of ``blocks`` so the discretization can treat it
    with a spectrally accurate sign matrix.
    """

    blocks: Callable
    jump22: float = 0.0


def half_line_rule(x_lo: float, nodes: int = DEFAULT_NODES, scale: float = 2.0):
    """Gauss-Legendre rule for ``[x_lo, inf)`` under ``y = x_lo - scale log u``."""
    u, wu = leggauss(nodes)
    u = 0.5 * (u + 1.0)
    wu = 0.5 * wu
    return x_lo - scale * np.log(u), scale * wu / u


@lru_cache(maxsize=None)
def sign_matrix(nodes: int) -> np.ndarray:
    """Discrete counterpart of ``sgn(y_i - y_j)`` for the half-line rule.

    Row ``i`` reproduces ``int sgn(y_i - y) f(y) dy`` exactly for ``f`` whose
    pullback is a polynomial of degree below ``nodes``: the tail integral from
    ``y_i`` is taken with the Legendre integration matrix rather than by
    cutting the rule at the node.
    """
    t, wt = leggauss(nodes)
    P = np.array([special.eval_legendre(n, t) for n in range(nodes + 1)])  # P[n, j] = P_n(t_j)
    # antiderivatives from -1 of each P_n, evaluated at the nodes
    anti = np.empty((nodes, nodes))
    anti[0] = t + 1.0
    for n in range(1, nodes):
        anti[n] = (P[n + 1] - P[n - 1]) / (2 * n + 1)
    coef = (2 * np.arange(nodes) + 1) / 2.0
    S = anti.T @ (coef[:, None] * P[:nodes]) * wt[None, :]  # S[i, j] = int_{-1}^{t_i} l_j
    return 1.0 - 2.0 * S / wt[None, :]


def _discretize(K: Kernel2x2, y, w) -> np.ndarray:
    """Skew matrix ``W^{1/2} K W^{1/2}`` in point-major order ``(x_1,1), (x_1,2), ...``."""
    k11, k12, k21, k22 = K.blocks(y, y)
    if K.jump22:
        k22 = k22 + K.jump22 * sign_matrix(len(y))
    s = np.sqrt(w)
    S = np.outer(s, s)
    N = len(y)
    M = np.empty((2 * N, 2 * N), dtype=np.result_type(k11, float))
    M[0::2, 0::2] = k11 * S
    M[0::2, 1::2] = k12 * S
    M[1::2, 0::2] = k21 * S
    M[1::2, 1::2] = k22 * S
    return 0.5 * (M - M.T)


def _j_matrix(N: int) -> np.ndarray:
    J = np.zeros((2 * N, 2 * N))
    idx = np.arange(N)
    J[2 * idx, 2 * idx + 1] = 1.0
    J[2 * idx + 1, 2 * idx] = -1.0
    return J


def fredholm_pfaffian(K: Kernel2x2, x_lo: float, nodes: int = DEFAULT_NODES, scheme: str = "matrix",
                      kmax: int = 6):
    """``Pf(J - K)`` on ``L^2(x_lo, inf)``.

    Parameters
    ----------
    scheme : {"matrix", "series", "both"}
        ``"matrix"`` takes one Pfaffian of the discretized operator.
        ``"series"`` sums the first ``kmax`` terms of the defining series:
        the ``k``-th term equals the ``z^k`` coefficient of ``Pf(J - z M)``,
        which is read off exactly from values on the unit circle by a
        discrete Fourier transform. ``"both"`` returns the matrix value
        after checking the two agree to ``SCHEME_TOL``.
    """
    y, w = half_line_rule(x_lo, nodes)
    M = _discretize(K, y, w)
    J = _j_matrix(len(y))
    if scheme == "matrix":
        return float(np.real(pfaffian(J - M)))
    series = _series_value(J, M, kmax)
    if scheme == "series":
        return series
    if scheme != "both":
        raise ValueError(f"unknown scheme {scheme!r}")
    direct = float(np.real(pfaffian(J - M)))
    if abs(direct - series) > SCHEME_TOL:
        raise ConsistencyError(f"matrix and series schemes differ: {direct} vs {series}")
    return direct


def series_coefficients(J, M, kmax: int, points: int = 64) -> np.ndarray:
    """Coefficients ``c_0..c_kmax`` of the polynomial ``z -> Pf(J - z M)``.

    Coefficients above ``points`` alias into the low ones; their size is
    negligible for trace-class kernels on the supported range.
    """
    zs = np.exp(2j * math.pi * np.arange(points) / points)
    vals = np.array([pfaffian(J - z * M) for z in zs])
    return np.fft.fft(vals)[: kmax + 1].real / points


def _series_value(J, M, kmax: int) -> float:
    return float(np.sum(series_coefficients(J, M, kmax)))


# ------------------------------------------------------ Tracy-Widom kernels


@lru_cache(maxsize=None)
def _wedge_rule(apex: float):
    z, w = wedge(apex, math.pi / 3, ARM_CUT, WEDGE_NODES).rule()
    return z, w


def _exp_factor(x, z) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(z[None, :] ** 3 / 3.0 - np.outer(x, z))


def _double(x, y, g: Callable, w_apex: float = 1.0) -> np.ndarray:
    """``int int g(z, w) e^{z^3/3 + w^3/3 - xz - yw}`` for all pairs of grid points."""
    z, wz = _wedge_rule(1.0)
    v, wv = _wedge_rule(w_apex)
    G = g(z[:, None], v[None, :]) * wz[:, None] * wv[None, :]
    return (_exp_factor(x, z) @ G @ _exp_factor(y, v).T).real


def _single(x, g: Callable) -> np.ndarray:
    z, wz = _wedge_rule(1.0)
    return (_exp_factor(x, z) @ (g(z) * wz)).real


def gse_blocks(x, y):
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    k11 = _double(x, y, lambda z, w: (z - w) / (4 * z * w * (z + w)))
    k12 = _double(x, y, lambda z, w: (z - w) / (4 * z * (z + w)))
    k21 = -_double(y, x, lambda z, w: (z - w) / (4 * z * (z + w))).T
    k22 = _double(x, y, lambda z, w: (z - w) / (4 * (z + w)))
    return k11, k12, k21, k22


def _goe_smooth(x, y):
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    k11 = _double(x, y, lambda z, w: (z - w) / (z + w))
    k12 = _double(x, y, lambda z, w: (w - z) / (2 * w * (z + w)), w_apex=-0.5)
    k21 = -_double(y, x, lambda z, w: (w - z) / (2 * w * (z + w)), w_apex=-0.5).T
    # the single integrals enter with the sign that makes Pf(J - K) a distribution function
    one = _single(x, lambda z: 1.0 / (4 * z))
    two = _single(y, lambda z: 1.0 / (4 * z))
    k22 = _double(x, y, lambda z, w: (z - w) / (4 * z * w * (z + w))) - one[:, None] + two[None, :]
    return k11, k12, k21, k22


def goe_blocks(x, y):
    """GOE kernel blocks including the ``-sgn(x - y)/4`` term (``sgn(0) = 0``)."""
    k11, k12, k21, k22 = _goe_smooth(x, y)
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    return k11, k12, k21, k22 - np.sign(np.subtract.outer(x, y)) / 4.0


def gse_kernel(r: float, s: float) -> np.ndarray:
    """2x2 block of the GSE kernel at ``(r, s)``."""
    return np.array([[b[0, 0] for b in gse_blocks(r, s)[:2]], [b[0, 0] for b in gse_blocks(r, s)[2:]]])


def goe_kernel(r: float, s: float) -> np.ndarray:
    """2x2 block of the GOE kernel at ``(r, s)``."""
    b = goe_blocks(r, s)
    return np.array([[b[0][0, 0], b[1][0, 0]], [b[2][0, 0], b[3][0, 0]]])


GSE = Kernel2x2(gse_blocks)
GOE = Kernel2x2(_goe_smooth, jump22=-0.25)


def _check_range(x: float):
    if not X_MIN <= x <= X_MAX:
        raise ScopeError(f"x={x} outside the supported range [{X_MIN}, {X_MAX}]")


def f_gse(x: float, nodes: int = DEFAULT_NODES, scheme: str = "matrix") -> float:
    """GSE Tracy-Widom distribution function."""
    _check_range(x)
    return fredholm_pfaffian(GSE, x, nodes, scheme)


def f_goe(x: float, nodes: int = DEFAULT_NODES, scheme: str = "matrix") -> float:
    """GOE Tracy-Widom distribution function."""
    _check_range(x)
    return fredholm_pfaffian(GOE, x, nodes, scheme)


def gaussian_cdf(x):
    """Standard normal distribution function via ``erfc``."""
    out = 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


class TabulatedCDF:
    """Monotone piecewise-linear interpolant of a CDF on ``[X_MIN, X_MAX]``.

    Values outside the table are clamped to 0 and 1, which is accurate to the
    tail bounds verified in the tests.
    """

    def __init__(self, fn: Callable, points: int = 81):
        self.x = np.linspace(X_MIN, X_MAX, points)
        v = np.array([fn(float(t)) for t in self.x])
        self.y = np.clip(np.maximum.accumulate(v), 0.0, 1.0)

    def __call__(self, x):
        out = np.interp(x, self.x, self.y, left=0.0, right=1.0)
        return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=None)
def tabulated(regime: str, points: int = 81) -> TabulatedCDF:
    fn = {"GSE": f_gse, "GOE": f_goe}[regime]
    return TabulatedCDF(fn, points)


# ------------------------------------------------------------ phase diagram


class PhaseConstants(NamedTuple):
    regime: str
    f: float
    sigma: float
    exponent: float


def phase_constants(alpha: float, alpha0: float) -> PhaseConstants:
    """Centering ``f`` and scale ``sigma`` for ``log Z(n, n) ~ f n + sigma n^exponent X``.

    ``sigma`` in the Tracy-Widom regimes is ``(-Psi_2(alpha))^{1/3}``, the
    real cube root of the tetragamma magnitude (``Psi_2 < 0`` on the half line).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if alpha0 <= -alpha:
        raise ValueError("need alpha + alpha0 > 0")
    if alpha0 >= 0:
        f = -2.0 * float(special.digamma(alpha))
        sigma = float(-special.polygamma(2, alpha)) ** (1.0 / 3.0)
        return PhaseConstants("GSE" if alpha0 > 0 else "GOE", f, sigma, 1.0 / 3.0)
    f = -float(special.digamma(alpha - alpha0) + special.digamma(alpha + alpha0))
    var = float(special.polygamma(1, alpha + alpha0) - special.polygamma(1, alpha - alpha0))
    return PhaseConstants("GAUSSIAN", f, math.sqrt(var), 0.5)


def limit_cdf(regime: str) -> Callable:
    """Limiting distribution function for a regime tag."""
    if regime == "GAUSSIAN":
        return gaussian_cdf
    return tabulated(regime)
