import itertools
import math

import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from hslab import dynamics as dy
from hslab import qdist as qd
from hslab import stats
from hslab import symfunc as sf

Q, A, A0 = 0.5, [0.5, 0.4, 0.3], 0.3


class ScriptedRng:
    """Stands in for a Generator: gamma(shape) returns 1/w for a preset weight per call."""

    def __init__(self, weights):
        self.weights = list(weights)
        self.shapes = []

    def gamma(self, shape):
        self.shapes.append(shape)
        return 1.0 / self.weights[len(self.shapes) - 1]


def measure_marginal(up, diag, index, q=Q):
    m = sf.MeasureSpec(tuple(up), sf.Specialization(tuple(diag)), sf.QTParams(q, 0.0))
    law = {}
    for lam, p in sf.enumerate_measure(m, 1 - 1e-13):
        v = lam[index] if len(lam) > index else 0
        law[v] = law.get(v, 0.0) + p
    return law


def chi2_against(values, law):
    K = max(max(law), int(values.max()))
    counts = np.bincount(values, minlength=K + 1)
    return stats.chi2_test(counts, np.array([law.get(k, 0.0) for k in range(K + 1)])).p_value


def paths(start, end, allowed):
    """All up-right lattice paths from start to end through allowed cells."""
    (i0, j0), (i1, j1) = start, end
    steps = ["i"] * (i1 - i0) + ["j"] * (j1 - j0)
    out = set()
    for perm in set(itertools.permutations(steps)):
        i, j, cells = i0, j0, [(i0, j0)]
        for s in perm:
            i, j = (i + 1, j) if s == "i" else (i, j + 1)
            cells.append((i, j))
        if all(allowed(c) for c in cells):
            out.add(tuple(cells))
    return out


# ------------------------------------------------------------------ polymer


def test_table_matches_half_space_path_sum():
    t, n = 4, 3
    p = dy.PolymerParams((1.0, 1.5, 2.0, 2.5), 0.5, t, n)
    rng = np.random.default_rng(0)
    cells = [(i, j) for i in range(1, t + 1) for j in range(1, min(i, n) + 1)]
    w = dict(zip(cells, rng.uniform(0.5, 2.0, len(cells))))
    Z = dy.loggamma_table(p, ScriptedRng([w[c] for c in cells]))
    direct = sum(math.prod(w[c] for c in path) for path in paths((1, 1), (t, n), lambda c: c[1] <= c[0]))
    assert Z[t, n] == pytest.approx(direct, rel=1e-13)
    assert Z[2, 1] == pytest.approx(w[1, 1] * w[2, 1], rel=1e-15)


def test_shapes_follow_boundary_and_bulk_rule():
    p = dy.PolymerParams((1.0, 1.5, 2.0), 0.25, 3, 2)
    rng = ScriptedRng([1.0] * 10)
    dy.loggamma_table(p, rng)
    assert rng.shapes == [1.25, 2.5, 1.75, 3.0, 3.5]


def test_symmetrized_quadrant_is_half():
    # symmetric weights with halved diagonal; every quadrant path counted
    for t, n in [(2, 2), (3, 2), (3, 3)]:
        rng = np.random.default_rng(t + n)
        w = {(i, j): rng.uniform(0.5, 2) for i in range(1, t + 1) for j in range(1, i + 1)}
        sym = lambda i, j: w[max(i, j), min(i, j)] * (0.5 if i == j else 1.0)
        z_sym = sum(math.prod(sym(*c) for c in path) for path in paths((1, 1), (t, n), lambda c: True))
        z_half = sum(math.prod(w[c] for c in path) for path in paths((1, 1), (t, n), lambda c: c[1] <= c[0]))
        assert z_sym == pytest.approx(0.5 * z_half, rel=1e-13)


def test_corner_weight_law():
    p = dy.PolymerParams((2.0,), 1.0, 1, 1)
    z = np.exp(dy.loggamma_log_partition(p, qd.make_rng(1), 50_000))
    d = stats.ks_distance(z, lambda x: qd.inv_gamma_cdf(x, 3.0))
    assert stats.ks_pvalue(d, z.size) > 1e-3


def test_log_partition_matches_table_sampler():
    p = dy.PolymerParams((1.2, 1.7, 2.1), 0.4, 3, 2)
    rng = qd.make_rng(2)
    a = np.log([dy.loggamma_table(p, rng)[3, 2] for _ in range(20_000)])
    b = dy.loggamma_log_partition(p, qd.make_rng(3), 20_000)
    assert stats.ks_two_sample(a, b)[1] > 1e-3


def test_mean_table_and_log_mean():
    p = dy.PolymerParams.homogeneous(6.0, 3.0, 3, 2)
    E = dy.loggamma_mean_table(p)
    assert E[1, 1] == pytest.approx(1 / 8)
    assert E[2, 1] == pytest.approx(1 / 88)
    assert math.log(E[3, 2]) == pytest.approx(dy.loggamma_log_mean(p), rel=1e-14)
    big = dy.PolymerParams.homogeneous(1.5, 1.0, 400, 400)
    assert np.isfinite(dy.loggamma_log_mean(big))


def test_moment_guard():
    p = dy.PolymerParams.homogeneous(6.0, 3.0, 1, 1)
    dy.moment_guard(8, p)
    with pytest.raises(ValueError, match="infinite"):
        dy.moment_guard(9, p)
    with pytest.raises(ValueError):
        dy.PolymerParams((1.0,), -1.0, 1, 1)


def test_boundary_identity_in_law():
    a, b, n = 3.0, 2.0, 4
    boundary = dy.PolymerParams((a / 2,) * n, b - a / 2, n, n)
    first_row = dy.PolymerParams((b - a / 2,) + (a / 2,) * (n - 1), a / 2, n, n)
    x = dy.loggamma_log_partition(boundary, qd.make_rng(4), 30_000)
    y = dy.loggamma_log_partition(first_row, qd.make_rng(5), 30_000)
    assert stats.ks_two_sample(x, y)[1] > 1e-3


# -------------------------------------------------------------- Monte Carlo


def test_monte_carlo_basic_contract():
    const = dy.monte_carlo(lambda rng, k: np.full(k, 2.5), 1000, seed=1)
    assert const.mean == 2.5 and const.stderr == 0.0 and const.count == 1000
    est = lambda rng, k: rng.random(k)
    r1 = dy.monte_carlo(est, 50_000, seed=7, chunk=7000)
    assert r1 == dy.monte_carlo(est, 50_000, seed=7, chunk=7000)
    assert r1 == dy.monte_carlo(est, 50_000, seed=7, threads=4, chunk=7000)
    with pytest.raises(ValueError):
        dy.monte_carlo(est, 1, seed=0)


def test_monte_carlo_flags_non_finite():
    def est(rng, k):
        v = rng.random(k)
        v[::10] = np.nan
        return v

    with pytest.warns(RuntimeWarning):
        r = dy.monte_carlo(est, 1000, seed=3)
    assert r.n_nonfinite == 100 and r.count == 900


def test_monte_carlo_inverse_gamma_mean():
    p = dy.PolymerParams((4.0,), 3.0, 1, 1)
    r = dy.monte_carlo(lambda rng, k: np.exp(dy.loggamma_log_partition(p, rng, k)), 100_000, seed=11)
    assert abs(r.mean - 1 / 6) < 4 * r.stderr


# ------------------------------------------------------------ push-block


def test_boundary_step_from_empty_is_q_geometric():
    rng = qd.make_rng(12)
    x = np.array([sum(dy.boundary_pushblock_sample((), 0.6, 0.7, Q, rng)) for _ in range(20_000)])
    law = {k: qd.q_geom_pmf(k, 0.42, Q) for k in range(60)}
    assert chi2_against(x, law) > 1e-3


def test_boundary_step_last_part_is_q_inverse_gaussian():
    rng = qd.make_rng(13)
    kappa, a_next, a0 = (5, 2), 0.6, 0.7
    last = [dy.boundary_pushblock_sample(kappa, a_next, a0, Q, rng) for _ in range(20_000)]
    third = np.array([p[2] if len(p) > 2 else 0 for p in last])
    m, theta = kappa[1], a0 * a_next  # parity (-1)^2 at the third coordinate
    law = {k: qd.q_inv_gauss_pmf(k, m, theta, Q) for k in range(m + 1)}
    assert chi2_against(third, law) > 1e-3
    assert all(sf.interlaces(kappa, p) for p in last[:200])


def test_bulk_step_from_empty_is_q_geometric():
    rng = qd.make_rng(14)
    x = np.array([sum(dy.bulk_pushblock_sample((), (), 0.5, 0.8, Q, rng)) for _ in range(20_000)])
    law = {k: qd.q_geom_pmf(k, 0.4, Q) for k in range(60)}
    assert chi2_against(x, law) > 1e-3


def test_bulk_step_support():
    rng = qd.make_rng(15)
    kappa, nu = (3, 1), (2, 2)
    for _ in range(300):
        pi = dy.bulk_pushblock_sample(kappa, nu, 0.5, 0.6, Q, rng)
        assert sf.interlaces(kappa, pi) and sf.interlaces(nu, pi)


def test_pushblock_reproduces_measure_at_2_2():
    up, diag = A[:2], (A0,)
    m = sf.MeasureSpec(tuple(up), sf.Specialization(diag), sf.QTParams(Q, 0.0))
    table = sf.enumerate_measure(m, 1 - 1e-12)
    index = {lam: i for i, lam in enumerate(p[0] for p in table)}
    draws = dy.pushblock_samples(A, A0, Q, 2, 2, qd.make_rng(16), 30_000)
    counts = np.zeros(len(table) + 1)
    for lam in draws:
        counts[index.get(lam, len(table))] += 1
    pmf = np.append([p for _, p in table], 0.0)
    assert stats.chi2_test(counts, pmf).p_value > 1e-3


def test_q_to_one_limit_of_pushblock():
    alpha, alpha0 = 2.0, 1.5
    ref = np.exp(dy.loggamma_log_partition(dy.PolymerParams.homogeneous(alpha, alpha0, 2, 2), qd.make_rng(17), 200_000))
    ks = []
    for eps in (0.1, 0.05):
        q = math.exp(-eps)
        lams = dy.pushblock_samples([q**alpha] * 2, q**alpha0, q, 2, 2, qd.make_rng(18), 10_000)
        lam1 = np.array([lam[0] if lam else 0 for lam in lams], dtype=float)
        ks.append(stats.ks_two_sample((1 - q) ** 3 * q ** (-lam1), ref)[0])
    assert ks[1] < ks[0]


# -------------------------------------------------------- particle systems


def test_qpush_first_step():
    st = dy.qpush_run(A, A0, Q, 1, qd.make_rng(19), 50_000)
    law = {k: qd.q_geom_pmf(k, A0 * A[0], Q) for k in range(60)}
    assert chi2_against(st.positions[:, 0] - 1, law) > 1e-3


@pytest.mark.parametrize("n", [1, 2])
def test_qpush_matches_first_part(n):
    st = dy.qpush_run(A, A0, Q, 2, qd.make_rng(20 + n), 50_000)
    assert np.all(np.diff(st.positions, axis=1) > 0)
    law = measure_marginal(A[:n], [A0] + A[n:2], 0)
    assert chi2_against(st.positions[:, n - 1] - n, law) > 1e-3


def test_qtasep_initial_and_marginals():
    st = dy.qtasep_run(A, A0, Q, 3, qd.make_rng(23), 50_000)
    assert st.positions.shape == (50_000, 3)
    assert np.all(np.diff(st.positions, axis=1) < 0)
    # x_n(t) + n is the n-th part of the measure with up variables a_1..a_n
    law = measure_marginal(A, [A0], 2)
    assert chi2_against(st.positions[:, 2] + 3, law) > 1e-3
    st2 = dy.qtasep_run(A, A0, Q, 2, qd.make_rng(24), 50_000)
    assert chi2_against(st2.positions[:, 0] + 1, measure_marginal(A[:1], [A0, A[1]], 0)) > 1e-3


def test_qtasep_zero_gap_never_moves():
    s = dy.ParticleState(np.array([[0, -1]] * 100), 2)
    nxt = dy.qtasep_activation_step(s, A, A0, Q, qd.make_rng(25))
    assert np.all(nxt.positions[:, 1] == -1)


# ------------------------------------------------------------- six-vertex


def test_vertex_rows_are_stochastic():
    for b, t in [(0.09, 0.4), (0.5, 0.0), (0.81, 0.9)]:
        pr = dy.vertex_probabilities(b, t)
        assert pr["h", "up"] + pr["h", "right"] == pytest.approx(1)
        assert pr["v", "up"] + pr["v", "right"] == pytest.approx(1)
        assert all(0 <= v <= 1 for v in pr.values())


def test_sixvertex_corner_and_conservation():
    N = 6
    h = dy.sixvertex_sample(dy.SixVertexParams((0.3,) * N, 0.4), N, qd.make_rng(26), 2000)
    # the first corner absorbs the incoming path
    assert np.all(h[:, 1, 1] == 0)
    for y in range(1, N + 1):
        row = h[:, 1:y + 1, y]
        assert np.all(np.diff(row, axis=1) >= 0) and np.all(np.diff(row, axis=1) <= 1)
    for x in range(1, N + 1):
        assert np.all(h[:, x, x:] <= x)
        assert np.all(np.diff(h[:, x, x:], axis=1) >= 0)


def test_sixvertex_corner_enumeration_vs_mc():
    p = dy.SixVertexParams((0.3, 0.3), 0.4)
    law = dy.sixvertex_corner_enumeration(p.a, p.t_hl, 1, 2)
    assert sum(law.values()) == pytest.approx(1.0)
    h = dy.sixvertex_sample(p, 2, qd.make_rng(27), 200_000)[:, 1, 2]
    counts = np.bincount(h, minlength=2)
    assert stats.chi2_test(counts, np.array([law.get(0, 0), law.get(1, 0)])).p_value > 1e-3


# ------------------------------------------------------------------- ASEP


def asep_exact_current_law(t, tau, L, x):
    """Law of N_x(tau) by exponentiating the generator on a window of L sites."""
    S = 1 << L
    rows, cols, vals = [], [], []
    for s in range(S):
        out = 0.0
        moves = [(s ^ 1, 0.5 if not s & 1 else t / 2)]
        for i in range(L - 1):
            a, b = (s >> i) & 1, (s >> (i + 1)) & 1
            if a and not b:
                moves.append((s ^ (3 << i), 1.0))
            if b and not a:
                moves.append((s ^ (3 << i), t))
        for target, rate in moves:
            rows.append(target)
            cols.append(s)
            vals.append(rate)
            out += rate
        rows.append(s)
        cols.append(s)
        vals.append(-out)
    gen = sparse.csc_matrix((vals, (rows, cols)), shape=(S, S))
    p0 = np.zeros(S)
    p0[0] = 1
    p = expm_multiply(gen * tau, p0)
    counts = np.array([bin(s >> (x - 1)).count("1") for s in range(S)])
    return np.bincount(counts, weights=p)


def test_asep_empty_at_time_zero():
    st = dy.asep_simulate(0.4, 0.0, qd.make_rng(28))
    assert not st.occupation.any()
    assert list(dy.asep_currents(st, [1, 2, 5])) == [0, 0, 0]


def test_asep_small_time_injection():
    tau, R = 0.02, 100_000
    rng = qd.make_rng(29)
    occ = np.array([dy.asep_simulate(0.4, tau, rng).occupation[0] for _ in range(R)])
    se = math.sqrt(tau / 2 / R)
    assert abs(occ.mean() - tau / 2) < 4 * se + tau**2


def test_asep_matches_master_equation():
    law = asep_exact_current_law(0.4, 1.0, 12, 1)
    rng = qd.make_rng(30)
    v = np.array([dy.asep_currents(dy.asep_simulate(0.4, 1.0, rng), [1])[0] for _ in range(30_000)])
    assert chi2_against(v, dict(enumerate(law))) > 1e-3


def test_sixvertex_converges_to_asep():
    t, tau, x, R = 0.4, 2.0, 1, 200_000
    cdf = np.cumsum(asep_exact_current_law(t, tau, 12, x))
    dist = []
    for eps in (0.1, 0.05, 0.02):
        n = int(round(tau / eps))
        a = 1 - (1 - t) * eps / 2
        h = dy.sixvertex_sample(dy.SixVertexParams((a,) * n, t), n, qd.make_rng(31), R)
        v = n - x - h[:, n - x, n]
        emp = np.cumsum(np.bincount(v, minlength=len(cdf))[: len(cdf)]) / R
        dist.append(np.max(np.abs(emp - cdf)))
    assert dist[0] > dist[1] > dist[2]
