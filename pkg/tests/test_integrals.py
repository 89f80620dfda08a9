import itertools
import math

import numpy as np
import pytest
from scipy import special

from hslab import integrals as I
from hslab.dynamics import PolymerParams, loggamma_mean_table, sixvertex_corner_enumeration
from hslab.symfunc import MeasureSpec, QTParams, Specialization, halfspace_pmf, partitions_of


def half_space_paths(t, n):
    """Up-right paths from (1,1) to (t,n) staying in j <= i."""
    out = []
    for steps in set(itertools.permutations("i" * (t - 1) + "j" * (n - 1))):
        i, j, cells = 1, 1, [(1, 1)]
        for s in steps:
            i, j = (i + 1, j) if s == "i" else (i, j + 1)
            cells.append((i, j))
        if all(b <= a for a, b in cells):
            out.append(cells)
    return out


def loggamma_moment_by_paths(k, p: PolymerParams):
    """E[Z^k] by expanding Z^k over k-tuples of paths; E[w^m] = Gamma(s-m)/Gamma(s)."""
    a = p.alphas

    def shape(i, j):
        return p.alpha0 + a[i - 1] if i == j else a[i - 1] + a[j - 1]

    total = 0.0
    for combo in itertools.product(half_space_paths(p.t, p.n), repeat=k):
        mult = {}
        for path in combo:
            for c in path:
                mult[c] = mult.get(c, 0) + 1
        total += math.prod(math.exp(special.gammaln(shape(*c) - m) - special.gammaln(shape(*c)))
                           for c, m in mult.items())
    return total


def enumerated_moment(a_list, alphas, q, fn, max_weight=60):
    # summing by weight: heavy observables like q^{-k lambda_1} need the far tail
    m = MeasureSpec(tuple(a_list), Specialization(alphas=tuple(alphas)), QTParams(q, 0.0))
    return sum(halfspace_pmf(lam, m) * fn(lam)
               for w in range(max_weight + 1) for lam in partitions_of(w, max_length=len(a_list)))


# ---------------------------------------------------------------- quadrature


def test_circle_rule_residue_and_analytic():
    assert abs(I.integrate_contour(lambda z: 1 / z, I.circle(0, 1, 16)).value - 1) < 1e-14
    assert abs(I.integrate_contour(lambda z: 1 / (z - 0.3), I.circle(0.1, 0.5, 16)).value - 1) < 1e-12
    assert abs(I.integrate_contour(lambda z: np.exp(z) * z**3, I.circle(0, 2, 16)).value) < 1e-12


def test_mellin_barnes_line():
    # closing to the right sums the geometric series in x = 0.3
    f = lambda s: -np.pi / np.sin(np.pi * s) * 0.3**s
    r = I.integrate_contour(f, I.vline(0.5, 14.0, 512))
    assert abs(r.value - (-0.3 / 1.3)) < 1e-10


def test_truncation_checked():
    with pytest.raises(I.AccuracyError, match="edge"):
        I.integrate_contour(lambda s: 1 / np.cosh(s.imag) + 0j, I.vline(0.5, 3.0, 64))


def test_contour_validation():
    with pytest.raises(ValueError):
        I.circle(0, -1)
    with pytest.raises(ValueError):
        I.wedge(0, 2.0, 5)
    with pytest.raises(ValueError):
        I.vline(0, math.inf)


def test_wedge_rule_integrates_gaussian_type():
    # int over the wedge of exp(z^3/3 - x z) equals 2 pi i Ai(x) / (2 pi i)
    c = I.wedge(0.0, math.pi / 3, 8.0, 256)
    for x in (-1.0, 0.0, 1.5):
        r = I.integrate_contour(lambda z: np.exp(z**3 / 3 - x * z), c)
        assert abs(r.value - special.airy(x)[0]) < 1e-12


# ------------------------------------------------------- log-gamma moments


def test_loggamma_first_moments_closed_form():
    assert I.moments_loggamma(1, 1, 1, [6], 3) == pytest.approx(1 / 8, rel=1e-10)
    assert I.moments_loggamma(1, 2, 1, [6], 3) == pytest.approx(1 / 88, rel=1e-10)
    assert I.moments_loggamma(2, 1, 1, [6], 3) == pytest.approx(1 / 56, rel=1e-10)


@pytest.mark.parametrize("k,t,n", [(1, 3, 2), (2, 2, 2), (2, 3, 2), (3, 2, 1)])
def test_loggamma_moments_vs_path_expansion(k, t, n):
    alphas, alpha0 = (6.0, 6.5, 7.0)[:t], 4.0
    p = PolymerParams(alphas, alpha0, t, n)
    exact = loggamma_moment_by_paths(k, p)
    assert I.moments_loggamma(k, t, n, alphas, alpha0) == pytest.approx(exact, rel=1e-9)


def test_loggamma_line_route_matches_recursion():
    p = PolymerParams.homogeneous(3.0, 1.5, 6, 4)
    log_rec = math.log(loggamma_mean_table(p)[6, 4])
    assert I.log_moment_loggamma_first(6, 4, [3.0], 1.5) == pytest.approx(log_rec, rel=1e-10)
    assert I.moments_loggamma(1, 6, 4, [3.0], 1.5, method="line") == pytest.approx(math.exp(log_rec), rel=1e-9)


def test_loggamma_node_doubling_invariance():
    a = I.moments_loggamma(2, 2, 2, [6], 4, nodes=32)
    b = I.moments_loggamma(2, 2, 2, [6], 4, nodes=128)
    assert a == pytest.approx(b, rel=1e-10)
    res = I.moments_loggamma(2, 2, 2, [6], 4, full=True)
    assert abs(res.value.imag) < 1e-10 * abs(res.value)


def test_loggamma_guards():
    with pytest.raises(ValueError, match="infinite"):
        I.moments_loggamma(3, 1, 1, [1.0], 1.5)
    with pytest.raises(I.ScopeError):
        I.moments_loggamma(4, 1, 1, [6], 3)
    with pytest.raises(I.PlanningError):
        I.moments_loggamma(3, 2, 2, [2.2], 2.0)


def test_plan_margins_positive():
    plan = I.plan_loggamma(2, PolymerParams.homogeneous(6.0, 3.0, 2, 2))
    assert all(v > 0 for v in plan.margins().values())
    bad = I.NestedContourPlan([I.circle(0, 1)]).add("encloses 2", I.enclose(0, [2.0]))
    with pytest.raises(I.PlanningError, match="encloses 2"):
        bad.verify()


# ----------------------------------------------------- q-Whittaker moments


def test_q_whittaker_single_variable():
    q, a, al = 0.5, 0.3, 0.4
    spec = Specialization(alphas=(al,))
    # one part, q-geometric with parameter a * alpha
    assert I.moments_qwhittaker_last(1, [a], spec, q) == pytest.approx(1 - a * al, rel=1e-10)
    assert I.moments_qwhittaker_first(1, [a], spec, q) == pytest.approx(1 / (1 - a * al / q), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2])
def test_q_whittaker_vs_enumeration(k):
    q, a, al = 0.5, (0.3, 0.25), (0.4,)
    spec = Specialization(alphas=al)
    last = enumerated_moment(a, al, q, lambda lam: q ** (k * (lam[1] if len(lam) > 1 else 0)))
    first = enumerated_moment(a, al, q, lambda lam: q ** (-k * (lam[0] if lam else 0)))
    assert I.moments_qwhittaker_last(k, a, spec, q) == pytest.approx(last, abs=1e-8)
    assert I.moments_qwhittaker_first(k, a, spec, q) == pytest.approx(first, rel=1e-8)


def test_q_whittaker_first_moment_guard():
    with pytest.raises(ValueError, match="infinite"):
        I.moments_qwhittaker_first(2, [0.8], Specialization(alphas=(0.1,)), 0.5)
    with pytest.raises(ValueError, match="beta"):
        I.moments_qwhittaker_last(1, [0.3], Specialization(betas=(0.1,)), 0.5)


# --------------------------------------------------------- six-vertex


@pytest.mark.parametrize("x,y", [(1, 1), (1, 2), (2, 2), (2, 3)])
def test_hl_moments_vs_corner_enumeration(x, y):
    t = 0.4
    law = sixvertex_corner_enumeration([0.3] * y, t, x, y)
    for k in (1, 2):
        exact = sum(p * t ** (-k * h) for h, p in law.items())
        assert I.moments_hl_sixvertex(k, x, y, [0.3], t) == pytest.approx(exact, rel=1e-9)


def test_hl_argument_checks():
    with pytest.raises(ValueError):
        I.moments_hl_sixvertex(1, 3, 2, [0.3], 0.4)
    with pytest.raises(I.ScopeError):
        I.moments_hl_sixvertex(4, 1, 1, [0.3], 0.4)


# ------------------------------------------------------ Laplace transforms


def inv_gamma_laplace(u, s):
    return 2 * u ** (s / 2) * special.kv(s, 2 * np.sqrt(u)) / special.gamma(s)


@pytest.mark.parametrize("u", [0.1, 1.0, 10.0])
def test_nfold_laplace_single_weight(u):
    assert abs(I.laplace_loggamma_nfold(u, 1, 1, [6], 3) - inv_gamma_laplace(u, 9)) < 1e-6


def test_nfold_laplace_limits_and_monotone():
    # small u: compare with the moment expansion of E[exp(-u Z)]
    u = 0.01
    m = [I.moments_loggamma(k, 2, 2, [6], 3) for k in (1, 2, 3)]
    series = 1 - u * m[0] + u**2 / 2 * m[1] - u**3 / 6 * m[2]
    assert abs(I.laplace_loggamma_nfold(u, 2, 2, [6], 3) - series) < 1e-10
    vals = [I.laplace_loggamma_nfold(u, 2, 2, [6], 3) for u in (0.5, 8.0, 32.0)]
    assert all(0 < b < a < 1 for a, b in zip(vals, vals[1:]))
    with pytest.raises(I.ScopeError):
        I.laplace_loggamma_nfold(1.0, 4, 4, [6], 3)
    with pytest.raises(I.PlanningError):
        I.laplace_loggamma_nfold(1.0, 1, 1, [6], 3, r=5.0)


def hybrid_single_oracle(u, al, a0, tau):
    """n = t = 1: Z = w * exp(B(tau) - al tau) with w inverse-Gamma(al + a0)."""
    x, w = np.polynomial.hermite_e.hermegauss(120)
    v = u * np.exp(-al * tau + math.sqrt(tau) * x)
    return float(np.sum(w * inv_gamma_laplace(v, al + a0)) / math.sqrt(2 * math.pi))


@pytest.mark.parametrize("u,al,a0,tau", [(1.0, 1.5, 0.7, 0.5), (0.3, 2.0, 1.0, 1.0)])
def test_series_laplace_single(u, al, a0, tau):
    r = I.laplace_series_whittaker(u, 1, 1, [al], a0, tau)
    assert r.terms[0] == 1.0
    assert r.warning is None
    assert abs(r.value - hybrid_single_oracle(u, al, a0, tau)) < 1e-3


def test_series_scope():
    with pytest.raises(I.ScopeError):
        I.laplace_series_whittaker(1.0, 3, 3, [1.5], 0.7, 0.5, kmax=3)
    with pytest.raises(ValueError):
        I.laplace_series_whittaker(1.0, 1, 1, [1.5], 0.7, 0.5, kmax=2)


# --------------------------------------------------------------------- KPZ


def test_kpz_moments():
    m1 = I.moments_kpz(1, 1.0, 0.0, 1.0)
    assert m1 == pytest.approx(0.448266, abs=1e-6)
    assert I.moments_kpz(2, 1.0, 0.0, 1.0) > m1**2
    with pytest.raises(I.ScopeError):
        I.moments_kpz(4, 1.0, 0.0, 1.0)
