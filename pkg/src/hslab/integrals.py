"""Numerical evaluation of contour-integral formulas.

Every evaluator works on a tensor grid of one-dimensional rules: trapezoid
rules on circles (spectrally accurate for periodic analytic integrands),
truncated trapezoid rules on vertical lines and Gauss-Legendre panels on the
two rays of a wedge. Accuracy is controlled by node doubling.

Nested contours are described by a :class:`NestedContourPlan`, whose
geometric constraints are checked on sampled points before any integration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special
from scipy.optimize import minimize_scalar

from .dynamics import PolymerParams, moment_guard

TWO_PI = 2.0 * math.pi
# magnitude of the integrand on truncation edges, relative to its peak
EDGE_TOL = 1e-14
# tensor grids are processed in blocks of at most this many points
BLOCK = 2_000_000


class PlanningError(ValueError):
    """No admissible contour family exists, or a proposed one violates a constraint."""


class AccuracyError(RuntimeError):
    """Quadrature failed to converge under node doubling or truncation."""


class ScopeError(ValueError):
    """Requested dimension exceeds what the tensor quadrature supports."""


class QuadResult(NamedTuple):
    value: complex
    error: float
    nodes: int


# ------------------------------------------------------------------ contours


@dataclass(frozen=True)
class Contour:
    """A closed circle, an upward vertical line or a rightward wedge.

    Circles are positively oriented. Lines run from ``re - i*im_cut`` to
    ``re + i*im_cut``. Wedges run in from ``apex + arm_cut e^{-i angle}`` to
    the apex and back out to ``apex + arm_cut e^{i angle}``. The truncation
    of lines and wedges is justified by the integrand's decay and is checked
    at run time (the edge value must fall below ``EDGE_TOL`` of the peak).
    """

    kind: str
    center: complex = 0j
    radius: float = 1.0
    re: float = 0.0
    im_cut: float = 10.0
    apex: float = 0.0
    angle: float = math.pi / 3
    arm_cut: float = 10.0
    nodes: int = 64

    def __post_init__(self):
        if self.kind not in ("circle", "vline", "wedge"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.kind == "circle" and not self.radius > 0:
            raise ValueError("circle radius must be positive")
        if self.kind == "wedge" and not 0 < self.angle < math.pi / 2:
            raise ValueError("wedge angle must lie in (0, pi/2)")
        for cut in (self.im_cut, self.arm_cut):
            if not (math.isfinite(cut) and cut > 0):
                raise ValueError("truncation cuts must be finite and positive")
        if self.nodes < 2:
            raise ValueError("need at least two nodes")

    def with_nodes(self, nodes: int) -> "Contour":
        return Contour(self.kind, self.center, self.radius, self.re, self.im_cut,
                       self.apex, self.angle, self.arm_cut, int(nodes))

    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``z`` and weights ``w`` with ``sum f(z) w ~ int f dz / (2 pi i)``."""
        N = self.nodes
        if self.kind == "circle":
            e = np.exp(1j * TWO_PI * np.arange(N) / N)
            return self.center + self.radius * e, self.radius * e / N
        if self.kind == "vline":
            y = np.linspace(-self.im_cut, self.im_cut, N)
            h = y[1] - y[0]
            w = np.full(N, h / TWO_PI, dtype=complex)
            w[[0, -1]] *= 0.5
            return self.re + 1j * y, w
        # wedge: Gauss-Legendre panels of unit length on each ray
        panels = max(1, math.ceil(self.arm_cut))
        x, wx = leggauss(max(2, N // (2 * panels)))
        edges = np.linspace(0.0, self.arm_cut, panels + 1)
        s = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges[:-1], edges[1:])])
        ws = np.concatenate([(b - a) / 2 * wx for a, b in zip(edges[:-1], edges[1:])])
        up, down = np.exp(1j * self.angle), np.exp(-1j * self.angle)
        # ordered along the curve so the truncation ends are the first and last nodes
        z = np.concatenate([self.apex + s[::-1] * down, self.apex + s * up])
        w = np.concatenate([-ws[::-1] * down, ws * up]) / (TWO_PI * 1j)
        return z, w

    def sample(self, m: int = 256) -> np.ndarray:
        """Points on the curve used by geometric checks."""
        return self.with_nodes(max(m, 2)).rule()[0]


def circle(center, radius, nodes=64) -> Contour:
    return Contour("circle", center=complex(center), radius=float(radius), nodes=nodes)


def vline(re, im_cut, nodes=256) -> Contour:
    return Contour("vline", re=float(re), im_cut=float(im_cut), nodes=nodes)


def wedge(apex, angle, arm_cut, nodes=128) -> Contour:
    return Contour("wedge", apex=float(apex), angle=float(angle), arm_cut=float(arm_cut), nodes=nodes)


class CircleUnion(NamedTuple):
    """Disjoint union of positively oriented circles treated as one contour."""

    circles: tuple

    def with_nodes(self, nodes: int) -> "CircleUnion":
        return CircleUnion(tuple(c.with_nodes(nodes) for c in self.circles))

    @property
    def nodes(self) -> int:
        return self.circles[0].nodes

    def rule(self):
        rules = [c.rule() for c in self.circles]
        return np.concatenate([r[0] for r in rules]), np.concatenate([r[1] for r in rules])

    def sample(self, m: int = 256) -> np.ndarray:
        return np.concatenate([c.sample(m) for c in self.circles])

    def inside(self, p) -> np.ndarray:
        return np.any([inside(c, p) for c in self.circles], axis=0)


def inside(c, p) -> np.ndarray:
    """Whether points ``p`` lie strictly inside the closed contour ``c``."""
    if isinstance(c, CircleUnion):
        return c.inside(p)
    if c.kind != "circle":
        raise ValueError("interior is only defined for circles")
    return np.abs(np.asarray(p) - c.center) < c.radius


# ---------------------------------------------------------------- quadrature


def integrate_contour(f: Callable, c, rtol: float = 1e-10, max_nodes: int = 1 << 16) -> QuadResult:
    """``int_c f(z) dz / (2 pi i)`` with node doubling.

    Raises
    ------
    AccuracyError
        If successive doublings stop shrinking the difference before the
        tolerance is met, or ``max_nodes`` is exceeded.
    """
    return tensor_integrate(lambda z: f(z), [c], rtol=rtol, max_nodes=max_nodes)


def _tensor_sum(f: Callable, rules, check_edges: Sequence[bool] = ()):
    """Sum of ``f * prod(w)`` over the tensor grid, blocked over axis 0.

    Returns the sum and, when some axis is flagged in ``check_edges``, the
    ratio of the largest integrand magnitude on those truncation edges to
    the largest magnitude overall.
    """
    k = len(rules)
    shapes = [len(r[0]) for r in rules]
    inner = int(np.prod(shapes[1:])) if k > 1 else 1
    step = max(1, BLOCK // max(inner, 1))
    zs = [r[0].reshape([-1 if i == j else 1 for j in range(k)]) for i, r in enumerate(rules)]
    ws = [r[1].reshape([-1 if i == j else 1 for j in range(k)]) for i, r in enumerate(rules)]
    w_inner = np.ones([1] * k)
    for w in ws[1:]:
        w_inner = w_inner * w
    flags = list(check_edges) + [False] * (k - len(check_edges))
    total = 0j
    peak = edge = 0.0
    for lo in range(0, shapes[0], step):
        sl = slice(lo, lo + step)
        vals = f(zs[0][sl], *zs[1:])
        vals = np.broadcast_to(vals, (min(step, shapes[0] - lo),) + tuple(shapes[1:]))
        if not np.all(np.isfinite(vals)):
            raise AccuracyError("integrand is not finite on the contour")
        total += np.sum(vals * ws[0][sl] * w_inner)
        if any(flags):
            mag = np.abs(vals)
            peak = max(peak, float(mag.max()))
            for ax, fl in enumerate(flags):
                if not fl:
                    continue
                if ax == 0:
                    idx = [i for i in (0, shapes[0] - 1) if lo <= i < lo + step]
                    for i in idx:
                        edge = max(edge, float(mag[i - lo].max()))
                else:
                    edge = max(edge, float(np.take(mag, [0, -1], axis=ax).max()))
    ratio = edge / peak if peak > 0 else 0.0
    return complex(total), ratio


def tensor_integrate(f: Callable, contours, rtol: float = 1e-10, atol: float = 1e-14,
                     max_nodes: int = 1 << 16, max_points: float = 6e7) -> QuadResult:
    """Iterated integral of ``f(z_1, ..., z_k)`` over a product of contours.

    Contours are grouped by kind (closed curves, truncated lines and wedges).
    Each group's node count is doubled on its own and the group is refined
    until its doubling changes the value by at most ``max(atol, rtol |value|)``.
    The returned value adds every group's last correction to the base value
    and the error is the sum of those corrections. Line cuts are verified
    against ``EDGE_TOL`` on every evaluation.
    """
    contours = list(contours)
    kinds = [getattr(c, "kind", "circle") for c in contours]
    edges = [k in ("vline", "wedge") for k in kinds]
    groups = sorted(set(kinds))

    def evaluate(cs):
        rules = [c.rule() for c in cs]
        if float(np.prod([len(r[0]) for r in rules])) > max_points:
            raise AccuracyError(f"node budget exhausted ({[len(r[0]) for r in rules]} nodes)")
        if max(len(r[0]) for r in rules) > max_nodes:
            raise AccuracyError(f"more than {max_nodes} nodes on one contour")
        val, ratio = _tensor_sum(f, rules, edges)
        if any(edges) and ratio > EDGE_TOL:
            raise AccuracyError(
                f"truncated contour too short: edge/peak ratio {ratio:.2e} exceeds {EDGE_TOL:.0e}")
        return val

    def doubled(cs, g):
        return [c.with_nodes(c.nodes * 2) if kd == g else c for c, kd in zip(cs, kinds)]

    base = evaluate(contours)
    history = {g: [] for g in groups}
    while True:
        trial = {g: evaluate(doubled(contours, g)) for g in groups}
        change = {g: abs(trial[g] - base) for g in groups}
        tol = max(atol, rtol * abs(base))
        if all(change[g] <= tol for g in groups):
            val = base + sum(trial[g] - base for g in groups)
            return QuadResult(val, float(sum(change.values())), max(c.nodes for c in contours) * 2)
        bad = [g for g in groups if change[g] > tol]
        for g in bad:
            h = history[g]
            h.append(change[g])
            if len(h) >= 3 and h[-1] > 0.5 * h[-2] and h[-2] > 0.5 * h[-3]:
                raise AccuracyError(f"node doubling is not converging on {g} contours "
                                    f"(last changes {h[-3:]})")
            contours = doubled(contours, g)
        base = trial[bad[0]] if len(bad) == 1 else evaluate(contours)


def _real(res: QuadResult, full: bool, what: str):
    tol = 1e-10 * max(1.0, abs(res.value))
    if abs(res.value.imag) > max(tol, 10 * res.error):
        raise AccuracyError(f"{what}: imaginary part {res.value.imag:.3e} is not negligible")
    return res if full else float(res.value.real)


# --------------------------------------------------------------------- plans


@dataclass
class NestedContourPlan:
    """Ordered contours plus the named constraints they must satisfy.

    Each constraint maps the contour list to a margin that must be positive.
    """

    contours: list
    constraints: list = field(default_factory=list)

    def add(self, name: str, margin: Callable):
        self.constraints.append((name, margin))
        return self

    def margins(self) -> dict:
        return {name: float(m(self.contours)) for name, m in self.constraints}

    def verify(self) -> "NestedContourPlan":
        for name, m in self.constraints:
            v = float(m(self.contours))
            if not v > 0:
                raise PlanningError(f"contour constraint violated: {name} (margin {v:.3g})")
        return self


def _circle_margin(c, p) -> float:
    """Positive when all ``p`` are inside ``c``: smallest ``radius - distance``."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    if isinstance(c, CircleUnion):
        return float(min(max(cc.radius - abs(x - cc.center) for cc in c.circles) for x in p))
    return float(np.min(c.radius - np.abs(p - c.center)))


def _outside_margin(c, p) -> float:
    """Positive when all ``p`` are outside ``c``."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    if isinstance(c, CircleUnion):
        return float(min(_outside_margin(cc, p) for cc in c.circles))
    return float(np.min(np.abs(p - c.center) - c.radius))


def enclose(i: int, points) -> Callable:
    return lambda cs: _circle_margin(cs[i], points)


def exclude(i: int, points) -> Callable:
    return lambda cs: _outside_margin(cs[i], points)


def image_inside(i: int, j: int, fmap: Callable) -> Callable:
    """Margin for ``fmap(contour j)`` lying inside contour ``i``."""
    return lambda cs: _circle_margin(cs[i], fmap(cs[j].sample()))


def image_outside(i: int, j: int, fmap: Callable) -> Callable:
    return lambda cs: _outside_margin(cs[i], fmap(cs[j].sample()))


def _line_order(i: int, j: int, gap: float) -> Callable:
    return lambda cs: cs[i].re - cs[j].re - gap


# -------------------------------------------------- log-gamma polymer moments


def _polymer(t, n, alphas, alpha0) -> PolymerParams:
    alphas = tuple(alphas)
    if len(alphas) == 1 and t > 1:
        alphas = alphas * t
    return PolymerParams(alphas, float(alpha0), int(t), int(n))


def _lg_single(w, p: PolymerParams):
    a = np.asarray(p.alphas)
    out = (1.0 + 2.0 * w) / (1.0 + w - p.alpha0)
    for ai in a[: p.t]:
        out = out / (ai - w - 1.0)
    for aj in a[: p.n]:
        out = out / (w + aj)
    return out


def _lg_cross(wa, wb):
    return (wa - wb) / (wa - wb - 1.0) * (1.0 + wa + wb) / (2.0 + wa + wb)


def plan_loggamma(k: int, p: PolymerParams, nodes: int = 64) -> NestedContourPlan:
    """Concentric circles around the poles ``-alpha_j`` with a radius ladder.

    Contour ``c`` must contain contour ``c+1`` shifted by one, exclude
    ``alpha0 - 1`` and ``alpha_i - 1``, and keep the reflected cross poles
    ``w_a = -2 - w_b`` outside.
    """
    a = np.asarray(p.alphas)
    poles = -a[: p.n]
    c0 = float(np.mean(poles))
    spread = float(np.max(np.abs(poles - c0)))
    bad = np.concatenate([[p.alpha0 - 1.0], a[: p.t] - 1.0])
    D = float(np.min(np.abs(bad - c0)))
    X = abs(2.0 + 2.0 * c0)
    # radii rho_k = spread + d, rho_c = rho_{c+1} + 1 + d; keep d of room to D
    d = (D - spread - (k - 1)) / (k + 1)
    if k >= 2:
        # rho_1 + rho_2 = 2 spread + 2k - 3 + (2k - 1) d must stay below X - d
        d = min(d, (X - 2 * spread - (2 * k - 3)) / (2 * k))
    if d <= 0:
        raise PlanningError(
            "no radius ladder fits: the poles -alpha_j, their unit shifts and the excluded "
            "points alpha0 - 1, alpha_i - 1 are too close together")
    radii = [spread + d + (k - 1 - c) * (1.0 + d) for c in range(k)]
    cs = [circle(c0, r, nodes) for r in radii]
    plan = NestedContourPlan(cs)
    for c in range(k):
        plan.add(f"contour {c + 1} encloses -alpha_j", enclose(c, poles))
        plan.add(f"contour {c + 1} excludes alpha0-1 and alpha_i-1", exclude(c, bad))
        for b in range(c + 1, k):
            plan.add(f"contour {c + 1} encloses contour {b + 1} + 1", image_inside(c, b, lambda z: z + 1.0))
            plan.add(f"contour {c + 1} excludes -2 - contour {b + 1}", image_outside(c, b, lambda z: -2.0 - z))
    return plan.verify()


def _lg_integrand(k, p):
    def f(*w):
        out = 1.0
        for m in range(k):
            out = out * _lg_single(w[m], p)
        for i in range(k):
            for j in range(i + 1, k):
                out = out * _lg_cross(w[i], w[j])
        return out
    return f


def _lg_log_single(w, p: PolymerParams):
    a = np.asarray(p.alphas)
    out = np.log(1.0 + 2.0 * w) - np.log(1.0 + w - p.alpha0)
    out = out - np.sum([np.log(ai - w - 1.0) for ai in a[: p.t]], axis=0)
    out = out - np.sum([np.log(w + aj) for aj in a[: p.n]], axis=0)
    return out


def log_moment_loggamma_first(t, n, alphas, alpha0, rtol: float = 1e-10) -> float:
    """``log E[Z(t, n)]`` from the single contour integral deformed to a vertical line.

    The line passes through the minimum of the pole part of the integrand on
    the real segment between ``max(-alpha_j)`` and ``min(alpha0-1, alpha_i-1)``
    (the saddle), and the substitution ``y = s sinh(x)`` absorbs algebraic tails.
    Stays finite where the moment itself would under- or overflow.
    """
    p = _polymer(t, n, alphas, alpha0)
    moment_guard(1, p)
    a = np.asarray(p.alphas)
    lo = float(np.max(-a[: p.n]))
    hi = float(min(p.alpha0 - 1.0, np.min(a[: p.t] - 1.0)))
    if not lo < hi:
        raise PlanningError("no vertical line separates -alpha_j from alpha0-1, alpha_i-1")

    def pole_part(r):
        return float(-np.sum(np.log(a[: p.t] - r - 1.0)) - np.sum(np.log(r + a[: p.n]))
                     - math.log(abs(1.0 + r - p.alpha0)))

    eps = 1e-9 * (hi - lo)
    r = minimize_scalar(pole_part, bounds=(lo + eps, hi - eps), method="bounded",
                        options={"xatol": 1e-10 * (hi - lo)}).x
    # curvature of the pole part sets the Gaussian width
    curv = float(np.sum(1.0 / (a[: p.t] - r - 1.0) ** 2) + np.sum(1.0 / (r + a[: p.n]) ** 2))
    s = 1.0 / math.sqrt(curv)
    ref = complex(_lg_log_single(np.array([r + 0j]), p)[0])

    def integrate(h, X):
        x = np.arange(-X, X + h / 2, h)
        y = s * np.sinh(x)
        jac = s * np.cosh(x)
        vals = np.exp(_lg_log_single(r + 1j * y, p) - ref) * jac
        return np.sum(vals) * h / TWO_PI, vals

    X, h = 4.0, 0.25
    while True:
        _, vals = integrate(h, X)
        if max(abs(vals[0]), abs(vals[-1])) < EDGE_TOL * np.max(np.abs(vals)):
            break
        X += 4.0
        if X > 80:
            raise AccuracyError("vertical-line integrand does not decay")
    prev = None
    while True:
        val, _ = integrate(h, X)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            break
        prev, h = val, h / 2
        if h < 1e-4:
            raise AccuracyError("vertical-line quadrature did not converge")
    # the phase of the reference point is folded into val
    scaled = val * np.exp(1j * ref.imag)
    if abs(scaled.imag) > 1e-8 * abs(scaled) or scaled.real <= 0:
        raise AccuracyError(f"first moment is not positive real: {scaled}")
    return float(math.log(scaled.real) + ref.real)


def moments_loggamma(k: int, t: int, n: int, alphas, alpha0: float, nodes: int = 64,
                     method: str = "auto", full: bool = False):
    """``E[Z(t, n)^k]`` for the half-space log-gamma polymer, ``k = 1, 2, 3``.

    Parameters
    ----------
    alphas : sequence of float
        ``alpha_1..alpha_t`` (a single value is broadcast).
    method : {"auto", "circles", "line"}
        ``"line"`` is only available for ``k = 1``. ``"auto"`` picks the line
        once ``t + n > 12``, where circles lose precision to dynamic range.

    Raises
    ------
    ValueError
        If the moment is infinite.
    PlanningError
        If no nested circle family exists.
    """
    if k not in (1, 2, 3):
        raise ScopeError("moment order is limited to k <= 3")
    p = _polymer(t, n, alphas, alpha0)
    moment_guard(k, p)
    if method == "auto":
        method = "line" if (k == 1 and t + n > 12) else "circles"
    if method == "line":
        if k != 1:
            raise ValueError("the vertical-line route exists for k = 1 only")
        v = math.exp(log_moment_loggamma_first(t, n, p.alphas, alpha0))
        return QuadResult(complex(v), 1e-10 * v, 0) if full else v
    plan = plan_loggamma(k, p, nodes)
    res = tensor_integrate(_lg_integrand(k, p), plan.contours)
    return _real(res, full, "log-gamma moment")


# ------------------------------------------------------- q-Whittaker moments


def _spec_parts(spec):
    alphas = tuple(getattr(spec, "alphas", ()))
    if getattr(spec, "betas", ()):
        raise ValueError("dual (beta) parameters are not supported by these formulas")
    return np.asarray(alphas, dtype=float), float(getattr(spec, "gamma", 0.0))


def _interval_circle(L, R, nodes):
    return circle((L + R) / 2, (R - L) / 2, nodes)


def plan_qwhittaker_last(k, a, alphas, q, nodes=128) -> NestedContourPlan:
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0) or np.any(a >= 1):
        raise ValueError("a_j must lie in (0, 1)")
    R = (1.0 + a.max()) / 2
    L = [0.0] * k
    L[k - 1] = a.min() / 2
    for c in range(k - 2, -1, -1):
        L[c] = 0.7 * q * L[c + 1]
    cs = [_interval_circle(L[c], R if c == 0 else R * (0.98 ** c), nodes) for c in range(k)]
    plan = NestedContourPlan(cs)
    for c in range(k):
        plan.add(f"contour {c + 1} encloses a_j", enclose(c, a))
        plan.add(f"contour {c + 1} excludes 0, 1 and -1", exclude(c, [0.0, 1.0, -1.0]))
        for b in range(c + 1, k):
            plan.add(f"contour {c + 1} encloses q * contour {b + 1}", image_inside(c, b, lambda z: q * z))
            plan.add(f"contour {c + 1} excludes 1 / contour {b + 1}", image_outside(c, b, lambda z: 1.0 / z))
    return plan.verify()


def moments_qwhittaker_last(k: int, a_list, spec, q: float, nodes: int = 128, full: bool = False):
    """``E[q^{k lambda_n}]`` for the q-Whittaker half-space measure with ``P(a_1..a_n)``.

    ``spec`` carries the usual parameters ``alphas`` and the Plancherel ``gamma``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    a = np.asarray(a_list, dtype=float)
    alphas, gamma = _spec_parts(spec)
    plan = plan_qwhittaker_last(k, a, alphas, q, nodes)

    def single(w):
        out = np.exp((q - 1.0) * gamma * w) / ((1.0 - w * w) * w)
        for aj in a:
            out = out * (1.0 - w * aj) / (1.0 - w / aj)
        for al in alphas:
            out = out * (1.0 - al * w)
        return out

    def f(*w):
        out = (-1.0) ** k
        for m in range(k):
            out = out * single(w[m])
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (w[i] - w[j]) / (w[i] / q - w[j]) * (1.0 - q * w[i] * w[j]) / (1.0 - w[i] * w[j])
        return out

    return _real(tensor_integrate(f, plan.contours), full, "q-Whittaker moment")


def plan_qwhittaker_first(k, a, alphas, q, nodes=128) -> NestedContourPlan:
    """Circles around ``1/a_j`` chosen by a deterministic search over ladders.

    Inner bounds ``L_c`` satisfy ``L_1 < q L_2 < ... < q^{k-1} L_k``, and the
    cross poles ``w_a w_b = q^{-2}`` stay off the contours. Among candidates
    the plan with the largest relative margin wins.
    """
    a = np.asarray(a, dtype=float)
    forbid = np.concatenate([[0.0], a / q, alphas / q])
    P = float(forbid.max())
    top = float((1.0 / a).min())
    far = float((1.0 / a).max())
    lo, hi = math.log(P), math.log(q ** (k - 1) * top)
    if not lo < hi:
        raise PlanningError("existence condition q^k > max(a)^2, max(a)*max(alpha) fails")
    best, best_m = None, 0.0
    fr = np.linspace(0.05, 0.95, 19)
    rfac = np.array([1.1, 1.3, 1.6, 2.0, 2.5, 3.0, 4.0])
    for g in itertools.combinations(fr, k):
        u = np.exp(lo + np.asarray(g) * (hi - lo))
        L = [u[c] / q ** c for c in range(k)]
        for rf in rfac:
            cs = [_interval_circle(L[c], far * rf, nodes) for c in range(k)]
            plan = _first_constraints(cs, k, a, forbid, q)
            m = min(v / cs[0].radius for v in plan.margins().values())
            if m > best_m:
                best, best_m = plan, m
    if best is None:
        raise PlanningError("no circle ladder separates q-shifted contours from the cross poles")
    return best.verify()


def _first_constraints(cs, k, a, forbid, q):
    plan = NestedContourPlan(cs)
    for c in range(k):
        plan.add(f"contour {c + 1} encloses 1/a_j", enclose(c, 1.0 / a))
        plan.add(f"contour {c + 1} excludes 0, a_j/q and alpha_i/q", exclude(c, forbid))
        for b in range(c + 1, k):
            plan.add(f"contour {c + 1} encloses q * contour {b + 1}", image_inside(c, b, lambda z: q * z))
            plan.add(f"contour {c + 1} excludes q^-2 / contour {b + 1}",
                     image_outside(c, b, lambda z: 1.0 / (q * q * z)))
            plan.add(f"contour {b + 1} excludes q^-2 / contour {c + 1}",
                     image_outside(b, c, lambda z: 1.0 / (q * q * z)))
    return plan


def moments_qwhittaker_first(k: int, a_list, spec, q: float, nodes: int = 128, full: bool = False):
    """``E[q^{-k lambda_1}]``; finite only when ``q^k`` beats ``max(a)^2`` and ``max(a) max(alpha)``."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    a = np.asarray(a_list, dtype=float)
    alphas, gamma = _spec_parts(spec)
    amax = a.max()
    if not (q**k > amax**2 and (alphas.size == 0 or q**k > alphas.max() * amax)):
        raise ValueError("E[q^{-k lambda_1}] is infinite for these parameters")
    plan = plan_qwhittaker_first(k, a, alphas, q, nodes)

    def single(w):
        out = (q * w * w - 1.0) / (q * w * w) * np.exp((1.0 / q - 1.0) * gamma / w) / w
        for aj in a:
            out = out * q * w / ((1.0 - w * aj) * (q * w - aj))
        for al in alphas:
            out = out * q * w / (q * w - al)
        return out

    def f(*w):
        out = (-1.0) ** k
        for m in range(k):
            out = out * single(w[m])
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (w[i] - w[j]) / (w[i] / q - w[j]) * (1.0 / q - w[i] * w[j]) / (1.0 / q**2 - w[i] * w[j])
        return out

    return _real(tensor_integrate(f, plan.contours), full, "q-Whittaker moment")


# ---------------------------------------------------- six-vertex HL moments


def plan_hl_sixvertex(k, a, t_hl, nodes=64) -> NestedContourPlan:
    """Each contour is a small circle at 0 plus a circle around the ``a_i``.

    Radii grow with the index so that ``t * C_j`` never meets ``C_i`` for
    ``i < j``. Fails when ``t`` is too small relative to the spread of radii
    the ladder needs.
    """
    a = np.asarray(a, dtype=float)
    ca = float(np.mean(a))
    sp = float(np.max(np.abs(a - ca)))
    t = t_hl
    # circle at the a_i: radius rho_j in (sp, rho_max) with a - rho_i > t(a + rho_j)
    rho_max = (ca * (1.0 - t) - sp * (1.0 + t)) / (1.0 + t)
    if rho_max <= sp:
        raise PlanningError("t too large: t * (circle around a) meets the circle around a")
    rhos = [sp + (rho_max - sp) * (0.35 + 0.3 * j / max(k - 1, 1)) for j in range(k)]
    # circle at 0: r_j = r_1 (g/t)^(j-1) with t r_j < a - rho, r_i < t (a - rho_j)
    g = 1.5
    cap = min(ca - sp - rhos[-1], t * (ca - rhos[-1] - sp)) * 0.6
    r1 = cap * (t / g) ** (k - 1)
    radii = [r1 * (g / t) ** j for j in range(k)]
    cs = [CircleUnion((circle(0.0, radii[j], nodes), circle(ca, rhos[j], nodes))) for j in range(k)]
    plan = NestedContourPlan(cs)
    for c in range(k):
        plan.add(f"contour {c + 1} encloses 0 and a_i", enclose(c, np.concatenate([[0.0], a])))
        plan.add(f"contour {c + 1} lies in the unit disk",
                 lambda cs, c=c: 1.0 - float(np.max(np.abs(cs[c].sample()))))
        plan.add(f"contour {c + 1} circles are disjoint",
                 lambda cs, c=c: cs[c].circles[1].center.real - cs[c].circles[1].radius - cs[c].circles[0].radius)
        for b in range(c + 1, k):
            plan.add(f"contour {c + 1} meets no part of t * contour {b + 1}",
                     lambda cs, c=c, b=b: _no_touch(cs[c], t * cs[b].sample()))
    return plan.verify()


def _no_touch(c: CircleUnion, pts) -> float:
    """Smallest distance from ``pts`` to the curve of ``c``, signed positive."""
    return float(min(np.min(np.abs(np.abs(pts - cc.center) - cc.radius)) for cc in c.circles))


def moments_hl_sixvertex(k: int, x: int, y: int, a_list, t_hl: float, nodes: int = 64, full: bool = False):
    """``E[t^{-k h(x, y)}]`` for the stochastic six-vertex height function.

    ``a_list`` holds ``a_1..a_y`` (a single value is broadcast), ``x <= y``.
    """
    if k not in (1, 2, 3):
        raise ScopeError("moment order is limited to k <= 3")
    if not 1 <= x <= y:
        raise ValueError("need 1 <= x <= y")
    a = np.asarray(a_list, dtype=float)
    if a.size == 1:
        a = np.full(y, float(a[0]))
    if a.size < y or np.any(np.abs(a) >= 1) or np.any(a <= 0):
        raise ValueError("need y values a_i in (0, 1)")
    t = float(t_hl)
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    plan = plan_hl_sixvertex(k, a[:x], t, nodes)

    def single(z):
        out = (1.0 - t * z * z) / ((1.0 - z * z) * z)
        for ai in a[:y]:
            out = out * (1.0 - ai * z) / (1.0 - t * ai * z)
        for ai in a[:x]:
            out = out * (z - ai / t) / (z - ai)
        return out

    def f(*z):
        out = t ** (k * (k - 1) / 2)
        for m in range(k):
            out = out * single(z[m])
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (z[i] - z[j]) / (z[i] - t * z[j]) * (1.0 - t * z[i] * z[j]) / (1.0 - z[i] * z[j])
        return out

    return _real(tensor_integrate(f, plan.contours), full, "six-vertex moment")


# ------------------------------------------------------- Laplace transforms


def _line_cut(logenv: Callable, start: float = 4.0, limit: float = 400.0) -> float:
    """Smallest ``y >= start`` (growing by 25%) where ``logenv`` has dropped by
    ``log(EDGE_TOL)`` plus a safety margin below its peak on ``[0, start]``."""
    ref = max(logenv(y) for y in np.linspace(1e-3, start, 17))
    y = start
    while logenv(y) - ref > math.log(EDGE_TOL) - 4.0:
        y *= 1.25
        if y > limit:
            raise AccuracyError("integrand envelope does not decay on the vertical line")
    return y


def laplace_loggamma_nfold(u: float, t: int, n: int, alphas, alpha0: float, r: float | None = None,
                           nodes: int | None = None, full: bool = False):
    """``E[exp(-u Z(t, n))]`` from the ``n``-fold vertical-line integral (``n <= 3``).

    ``r`` defaults to ``max(alpha_i) + 1/2``.
    """
    if n > 3:
        raise ScopeError("the n-fold Laplace integral is supported for n <= 3")
    if not u > 0:
        raise ValueError("u must be positive")
    p = _polymer(t, n, alphas, alpha0)
    a = np.asarray(p.alphas)
    an, at = a[: p.n], a[p.n: p.t]
    if r is None:
        r = float(an.max()) + 0.5
    if not (r > an.max() and r + p.alpha0 > 0):
        raise PlanningError("need r > alpha_i and r + alpha0 > 0")
    lu = math.log(u)
    const = (-np.sum([special.loggamma(an[i] + an[j]) for i in range(n) for j in range(i + 1, n)])
             - np.sum(special.loggamma(p.alpha0 + an)) - np.sum([special.loggamma(aj + an) for aj in at]))

    def single_log(z, ai):
        out = (ai - z) * lu + special.loggamma(p.alpha0 + z)
        for aj in an:
            out = out + special.loggamma(z - aj)
        for aj in at:
            out = out + special.loggamma(aj + z)
        return out

    def f(*z):
        out = const
        for i in range(n):
            out = out + single_log(z[i], an[i])
        for i in range(n):
            for j in range(i + 1, n):
                out = out + special.loggamma(z[i] + z[j])
        val = np.exp(out)
        for i in range(n):
            for j in range(i + 1, n):
                val = val * special.rgamma(z[i] - z[j]) * special.rgamma(z[j] - z[i])
        return val / math.factorial(n)

    # one variable moving with the rest at y = 0
    def env(y):
        z = r + 1j * y
        v = float(np.real(single_log(np.array([z]), an[0])[0]))
        sk = math.log(y * math.sinh(math.pi * y) / math.pi) if y > 0 else 0.0
        return v + (n - 1) * (float(np.real(special.loggamma(z + r))) + sk)

    cut = _line_cut(env) * (1.0 + 0.5 * (n - 1))
    base = nodes or max(64, int(cut / 0.2))
    cs = [vline(r, cut, base) for _ in range(n)]
    res = tensor_integrate(f, cs, rtol=1e-10, atol=1e-13)
    return _real(res, full, "Laplace transform")


class SeriesResult(NamedTuple):
    value: float
    terms: tuple
    term_errors: tuple
    last_term: float
    warning: str | None


def plan_series(n, alphas, alpha0, nodes_v=32):
    """Line abscissa ``R`` and a circle around ``alpha_1..alpha_n`` for the series formula."""
    an = np.asarray(alphas[:n], dtype=float)
    spread = float(an.max() - an.min()) if n > 1 else 0.0
    R_hi = min(1.0, float(an.min()), alpha0 + float(an.min()))
    if not spread < R_hi:
        raise ValueError("closeness hypotheses fail: need alpha_i - alpha_j < min(1, alpha, alpha0 + alpha)")
    R = 0.5 * (spread + R_hi)
    c = 0.5 * (an.max() + an.min())
    half = spread / 2
    hi = min(R / 2, 1.0 - half, c - R, alpha0 + c - R)
    if not hi > half:
        raise PlanningError("no circle encloses the alpha_j while avoiding the shifted poles")
    rho = 0.5 * (half + hi)
    return R, circle(c, rho, nodes_v)


def laplace_series_whittaker(u: float, t: int, n: int, alphas, alpha0: float, tau: float,
                             kmax: int | None = None, nodes_v: int = 32) -> SeriesResult:
    """``E[exp(-u Z(t, n, tau))]`` as a partial sum of the ``k``-indexed series.

    The ``k``-th term is a ``2k``-fold integral over ``s`` on ``R + iR`` and
    ``v`` on circles around the ``alpha_j``. ``kmax`` defaults to
    ``min(n, 2)`` and cannot exceed 2. The result carries per-term quadrature
    errors, the last term magnitude and a warning when terms grow.
    """
    if not (u > 0 and tau > 0):
        raise ValueError("need u > 0 and tau > 0")
    p = _polymer(t, n, alphas, alpha0)
    kmax = min(n, 2) if kmax is None else int(kmax)
    if kmax > n:
        raise ValueError("kmax cannot exceed n")
    if kmax > 2:
        raise ScopeError("series terms beyond k = 2 are not supported")
    a = np.asarray(p.alphas)
    an, aa = a[: p.n], a[: p.t]
    R, vc = plan_series(n, p.alphas, p.alpha0, nodes_v)
    lu = math.log(u)

    def log_gbar(v):
        out = -tau * v * v / 2 - special.loggamma(p.alpha0 + v)
        for aj in an:
            out = out + special.loggamma(aj - v)
        for aj in aa:
            out = out - special.loggamma(aj + v)
        return out

    def single(s, v):
        lg = (log_gbar(v) - log_gbar(v - s) + special.loggamma(2 * v) - special.loggamma(2 * v - s) + s * lu)
        return -math.pi / np.sin(math.pi * s) * np.exp(lg) / s

    def pair(si, vi, sj, vj):
        num = (si + vj - sj - vi) * (vi - vj)
        den = (vj - sj - vi) * (vi - si - vj)
        lg = (special.loggamma(vi + vj) + special.loggamma(vi + vj - si - sj)
              - special.loggamma(vi + vj - si) - special.loggamma(vi + vj - sj))
        return num / den * np.exp(lg)

    def term(k):
        def f(*z):
            s, v = z[:k], z[k:]
            # sign fixed against the explicit n = 1 law and hybrid-polymer simulation
            out = (-1.0) ** k / math.factorial(k)
            for i in range(k):
                out = out * single(s[i], v[i])
            for i in range(k):
                for j in range(i + 1, k):
                    out = out * pair(s[i], v[i], s[j], v[j])
            return out
        return f

    def env(y):
        s = np.array([R + 1j * y])
        v = np.array([vc.center + vc.radius])
        return float(np.log(np.abs(single(s, v)[0]) + 1e-300))

    cut = _line_cut(env, start=2.0)
    terms, errs = [1.0], [0.0]
    for k in range(1, kmax + 1):
        base = max(48, int(cut / 0.15)) if k == 1 else max(32, int(cut / 0.25))
        cs = [vline(R, cut, base) for _ in range(k)] + [vc.with_nodes(nodes_v if k == 1 else 16)] * k
        res = tensor_integrate(term(k), cs, rtol=1e-8, atol=1e-12)
        terms.append(float(res.value.real))
        errs.append(float(res.error))
    warn = None
    if kmax >= 1 and len(terms) >= 3 and abs(terms[-1]) > abs(terms[-2]):
        warn = f"term magnitudes grow at k = {kmax}: |{terms[-1]:.3e}| > |{terms[-2]:.3e}|"
    if kmax < n:
        warn = (warn + "; " if warn else "") + f"series truncated at k = {kmax} < n = {n}"
    return SeriesResult(float(sum(terms)), tuple(terms), tuple(errs), abs(terms[-1]), warn)


# ------------------------------------------------------------- KPZ moments


def plan_kpz(k: int, alpha0: float, nodes: int = 256, cut: float = 10.0) -> NestedContourPlan:
    rk = max(0.5 - alpha0, 0.0) + 0.25
    res = [rk + (k - 1 - c) * 1.5 for c in range(k)]
    cs = [vline(r, cut, nodes) for r in res]
    plan = NestedContourPlan(cs)
    for c in range(k - 1):
        plan.add(f"line {c + 1} lies more than 1 to the right of line {c + 2}", _line_order(c, c + 1, 1.0))
    plan.add(f"line {k} lies right of 1/2 - alpha0", lambda cs: cs[-1].re - (0.5 - alpha0))
    plan.add("pairs of lines sum to more than 1", lambda cs: min(
        (cs[i].re + cs[j].re - 1.0 for i in range(k) for j in range(i + 1, k)), default=1.0))
    return plan.verify()


def moments_kpz(k: int, T: float, X: float, alpha0: float, full: bool = False):
    """``k``-th moment of the half-line continuum polymer partition function at ``(T, X)``."""
    if k not in (1, 2, 3):
        raise ScopeError("moment order is limited to k <= 3")
    if not T > 0:
        raise ValueError("T must be positive")
    # Gaussian factor exp(-T y^2 / 2) sets the cut
    cut = math.sqrt(2.0 * (-math.log(EDGE_TOL) + 12.0 + 2.0 * k) / T) + 2.0
    plan = plan_kpz(k, alpha0, nodes=max(128, int(cut / 0.05)), cut=cut)

    def single(z):
        return z / (z + alpha0 - 0.5) * np.exp(T * z * z / 2 - z * X)

    def f(*z):
        out = 2.0**k
        for m in range(k):
            out = out * single(z[m])
        for i in range(k):
            for j in range(i + 1, k):
                out = out * (z[i] - z[j]) / (z[i] - z[j] - 1.0) * (z[i] + z[j]) / (z[i] + z[j] - 1.0)
        return out

    return _real(tensor_integrate(f, plan.contours), full, "KPZ moment")


def kpz_scaling_log_constant(n: int, T: float, X: float) -> float:
    """``log C_n`` in ``Z_n = C_n Z(Tn/2 + sqrt(n) X, Tn/2)`` with ``alpha_i = sqrt(n)``."""
    rn = math.sqrt(n)
    return (T * n * math.log(n) - (T - X * math.log(n)) * rn) / 2 - T / 8 - X / 2
