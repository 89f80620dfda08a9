"""Command-line experiment harness.

Usage::

    lab verify|sample|moments|laplace|tw|phase --config run.json --out results/ [--threads N] [--seed S]

Each run reads a JSON config (``seed`` is required, unknown keys are
rejected), writes ``<command>.csv`` and ``<command>.json`` into the output
directory and exits with status 0 exactly when all checks pass.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, dynamics, integrals, pfaffian, qdist, stats, symfunc

# Every tolerance in one table; a config may override entries under "tolerances".
DEFAULT_TOLERANCES = {
    "identity_gap": 1e-8,
    "exact_gap": 1e-12,
    "significance": 1e-3,
    "z_score": 4.0,
    "pfaffian_gap": 1e-10,
    "scheme_gap": 1e-5,
    "ks_gaussian": 0.08,
    "ks_tracy_widom": 0.25,
}
EXIT_USAGE = 2

COMMON_KEYS = {"seed", "tolerances", "threads"}
SCHEMA = {
    "verify": {"checks", "littlewood_cap", "chi2_samples"},
    "sample": {"model", "params", "replicas"},
    "moments": {"model", "params", "ks", "replicas"},
    "laplace": {"params", "us", "replicas"},
    "tw": {"xs", "nodes", "series_check"},
    "phase": {"alpha", "alpha0", "ns", "replicas", "max_cells"},
}


class UsageError(ValueError):
    """Malformed command line or config."""


# ------------------------------------------------------------------ config


def load_config(command: str, path: str, seed: int | None = None, threads: int | None = None) -> dict:
    """Read and validate a config file; command-line ``seed`` and ``threads`` win."""
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    allowed = SCHEMA[command] | COMMON_KEYS
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {unknown}")
    if seed is not None:
        cfg["seed"] = seed
    if "seed" not in cfg:
        raise UsageError("config must set an integer 'seed'")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise UsageError("seed must be a nonnegative integer")
    if threads is not None:
        cfg["threads"] = threads
    cfg.setdefault("threads", 1)
    tol = dict(DEFAULT_TOLERANCES)
    extra = cfg.get("tolerances", {})
    bad = sorted(set(extra) - set(tol))
    if bad:
        raise UsageError(f"unknown tolerance names: {bad}")
    tol.update(extra)
    cfg["tolerances"] = tol
    return cfg


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise UsageError(f"config is missing {key!r}")
    return cfg[key]


def _polymer(params: dict) -> dynamics.PolymerParams:
    t, n = int(_need(params, "t")), int(_need(params, "n"))
    alphas = params.get("alphas")
    if alphas is None:
        alphas = [float(_need(params, "alpha"))] * t
    return dynamics.PolymerParams(tuple(alphas), float(_need(params, "alpha0")), t, n)


# ---------------------------------------------------------------- commands


def cmd_verify(cfg: dict):
    """Named identity and distribution checks; returns rows and the overall verdict."""
    tol = cfg["tolerances"]
    wanted = cfg.get("checks") or list(VERIFY_CHECKS)
    unknown = sorted(set(wanted) - set(VERIFY_CHECKS))
    if unknown:
        raise UsageError(f"unknown checks: {unknown}")
    rows = []
    for name in wanted:
        value, threshold, passed, detail = VERIFY_CHECKS[name](cfg, tol)
        rows.append({"check": name, "value": value, "threshold": threshold, "passed": passed,
                     "detail": detail})
    return ["check", "value", "threshold", "passed", "detail"], rows, all(r["passed"] for r in rows)


def _check_littlewood(cfg, tol):
    qt = symfunc.QTParams(0.3, 0.4)
    m = symfunc.MeasureSpec((0.2, 0.15), symfunc.Specialization(alphas=(0.1,)), qt)
    r = symfunc.verify_littlewood(m, int(cfg.get("littlewood_cap", 40)))
    return r.gap, tol["identity_gap"], r.gap < tol["identity_gap"], f"lhs={r.lhs_truncated!r} rhs={r.rhs!r}"


def _check_cauchy(cfg, tol):
    qt = symfunc.QTParams(0.3, 0.4)
    xs, ys = (0.2, 0.15), (0.25, 0.1)
    lhs = symfunc.cauchy_sum(xs, ys, qt, int(cfg.get("littlewood_cap", 40)))
    rhs = symfunc.pi_norm(symfunc.Specialization(alphas=xs), symfunc.Specialization(alphas=ys), qt)
    gap = abs(lhs - rhs)
    return gap, tol["identity_gap"], gap < tol["identity_gap"], f"lhs={lhs!r} rhs={rhs!r}"


def _check_boundary_geom(cfg, tol):
    # one boundary step from the empty partition is a single q-geometric part
    q, a0, a1 = 0.5, 0.4, 0.6
    m = symfunc.MeasureSpec((a1,), symfunc.Specialization(alphas=(a0,)), symfunc.QTParams(q, 0.0))
    gap = max(abs(symfunc.halfspace_pmf((k,) if k else (), m) - qdist.q_geom_pmf(k, a0 * a1, q))
              for k in range(30))
    return gap, tol["exact_gap"], gap < tol["exact_gap"], "pmf vs qGeom(a0*a1), k < 30"


def _check_chi2_dynamics(cfg, tol):
    q, a, a0, t, n = 0.5, (0.5, 0.4), 0.3, 2, 1
    N = int(cfg.get("chi2_samples", 100_000))
    p = chi2_pushblock(a, a0, q, t, n, N, cfg["seed"])
    return p, tol["significance"], p > tol["significance"], f"(t,n)=({t},{n}) q={q} samples={N}"


def _check_pfaffian(cfg, tol):
    rng = qdist.make_rng(cfg["seed"])
    # jittered grid keeps the product away from zero so the relative gap is meaningful
    x = 0.3 + 0.3 * np.arange(6) + rng.uniform(0, 0.15, 6)
    S = (x[:, None] - x[None, :]) / (x[:, None] + x[None, :])
    prod = np.prod([(x[i] - x[j]) / (x[i] + x[j]) for i in range(6) for j in range(i + 1, 6)])
    g1 = abs(pfaffian.pfaffian(S) - prod) / max(abs(prod), 1e-300)
    A = rng.normal(size=(8, 8))
    A = A - A.T
    d = np.linalg.det(A)
    g2 = abs(pfaffian.pfaffian(A) ** 2 - d) / abs(d)
    gap = max(g1, g2)
    return gap, tol["pfaffian_gap"], gap < tol["pfaffian_gap"], f"schur={g1:.2e} pf2_det={g2:.2e}"


def _check_limits(cfg, tol):
    eps, s, L, N = 0.01, 2.5, 1.3, 100_000
    q = math.exp(-eps)
    rng = qdist.split(cfg["seed"], 1)
    g = qdist.q_geom_rescale(qdist.q_geom_sample(math.exp(-eps * s), q, rng, N), eps)
    k1 = stats.ks_distance(g, lambda x: qdist.inv_gamma_cdf(x, s))
    m = qdist.q_inv_gauss_size(L, eps)
    y = qdist.q_inv_gauss_rescale(qdist.q_inv_gauss_sample(m, math.exp(-eps * 0.7), q, rng, N), eps)
    k2 = stats.ks_distance(y, lambda x: qdist.gig_cdf(x, 0.7, L))
    ok = k1 < 0.02 and k2 < 0.03
    return max(k1, k2), 0.02, ok, f"invgamma_ks={k1:.4f} (<0.02) gig_ks={k2:.4f} (<0.03)"


def _check_sixvertex_corner(cfg, tol):
    a, t_hl = [0.3], 0.4
    law = dynamics.sixvertex_corner_enumeration(a, t_hl, 1, 1)
    gap = 0.0
    for k in (1, 2):
        exact = sum(p * t_hl ** (-k * h) for h, p in law.items())
        gap = max(gap, abs(integrals.moments_hl_sixvertex(k, 1, 1, a, t_hl) - exact))
    return gap, 1e-10, gap < 1e-10, "contour vs corner enumeration, k in {1,2}"


def _check_tw_schemes(cfg, tol):
    gap = 0.0
    for x in (-3.0, -1.0, 1.0):
        for f in (pfaffian.f_goe, pfaffian.f_gse):
            gap = max(gap, abs(f(x) - f(x, scheme="series")))
    return gap, tol["scheme_gap"], gap < tol["scheme_gap"], "matrix vs series at x in {-3,-1,1}"


VERIFY_CHECKS: dict[str, Callable] = {
    "littlewood": _check_littlewood,
    "cauchy": _check_cauchy,
    "boundary_geom": _check_boundary_geom,
    "dynamics_chi2": _check_chi2_dynamics,
    "pfaffian": _check_pfaffian,
    "limits": _check_limits,
    "sixvertex_corner": _check_sixvertex_corner,
    "tw_schemes": _check_tw_schemes,
}


def chi2_pushblock(a, a0, q, t, n, samples, seed, support_mass=1 - 1e-12) -> float:
    """p-value of push-block samples against the enumerated half-space measure."""
    m = symfunc.MeasureSpec(tuple(a[:n]), symfunc.Specialization(alphas=(a0,) + tuple(a[n:t])),
                            symfunc.QTParams(q, 0.0))
    table = symfunc.enumerate_measure(m, support_mass)
    support = [lam for lam, _ in table]
    pmf = np.array([p for _, p in table])
    draws = dynamics.pushblock_samples(list(a), a0, q, t, n, qdist.make_rng(seed), samples)
    index = {lam: i for i, lam in enumerate(support)}
    counts = np.zeros(len(support) + 1)
    for lam in draws:
        counts[index.get(symfunc.as_partition(lam), len(support))] += 1
    pmf = np.append(pmf, max(0.0, 1.0 - pmf.sum()))
    return stats.chi2_test(counts, pmf).p_value


def cmd_sample(cfg: dict):
    model = _need(cfg, "model")
    params = cfg.get("params", {})
    R = int(cfg.get("replicas", 1000))
    rng = qdist.make_rng(cfg["seed"])
    if model == "loggamma":
        p = _polymer(params)
        lz = dynamics.loggamma_log_partition(p, rng, R)
        rows = [{"replica": i, "log_Z": float(v)} for i, v in enumerate(lz)]
        header = ["replica", "log_Z"]
    elif model == "pushblock":
        lams = dynamics.pushblock_samples(list(_need(params, "a")), float(_need(params, "a0")),
                                          float(_need(params, "q")), int(_need(params, "t")),
                                          int(_need(params, "n")), rng, R)
        rows = [{"replica": i, "lambda": " ".join(map(str, lam))} for i, lam in enumerate(lams)]
        header = ["replica", "lambda"]
    elif model in ("qpush", "qtasep"):
        run = dynamics.qpush_run if model == "qpush" else dynamics.qtasep_run
        if len(_need(params, "a")) < int(_need(params, "steps")):
            raise UsageError("params.a needs at least one rate per step")
        st = run(list(_need(params, "a")), float(_need(params, "a0")), float(_need(params, "q")),
                 int(_need(params, "steps")), rng, R)
        header = ["replica"] + [f"x{j + 1}" for j in range(st.positions.shape[1])]
        rows = [dict(zip(header, [i] + [int(v) for v in row])) for i, row in enumerate(st.positions)]
    elif model == "sixvertex":
        N = int(_need(params, "N"))
        a = params["a"] if isinstance(params.get("a"), list) else [float(_need(params, "a"))] * N
        h = dynamics.sixvertex_sample(dynamics.SixVertexParams(a, float(_need(params, "t_hl"))), N, rng, R)
        header = ["replica", "x", "y", "h"]
        rows = [{"replica": r, "x": x, "y": y, "h": int(h[r, x, y])}
                for r in range(R) for y in range(1, N + 1) for x in range(1, y + 1)]
    elif model == "asep":
        xs = list(_need(params, "xs"))
        header = ["replica"] + [f"N{x}" for x in xs]
        rows = []
        for r in range(R):
            st = dynamics.asep_simulate(float(_need(params, "t_hl")), float(_need(params, "horizon")), rng)
            rows.append(dict(zip(header, [r] + [int(v) for v in dynamics.asep_currents(st, xs)])))
    else:
        raise UsageError(f"unknown model {model!r}")
    return header, rows, True


def cmd_moments(cfg: dict):
    model = cfg.get("model", "loggamma")
    params = cfg.get("params", {})
    ks = [int(k) for k in cfg.get("ks", [1, 2])]
    R = int(cfg.get("replicas", 1_000_000))
    zmax = cfg["tolerances"]["z_score"]
    rows = []
    for k in ks:
        if model == "loggamma":
            p = _polymer(params)
            try:
                dynamics.moment_guard(k, p)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            exact = integrals.moments_loggamma(k, p.t, p.n, p.alphas, p.alpha0)
            est = lambda rng, size, p=p, k=k: np.exp(k * dynamics.loggamma_log_partition(p, rng, size))
        elif model == "sixvertex":
            x, y, t_hl = int(_need(params, "x")), int(_need(params, "y")), float(_need(params, "t_hl"))
            a = [float(_need(params, "a"))] * y
            exact = integrals.moments_hl_sixvertex(k, x, y, a, t_hl)
            sp = dynamics.SixVertexParams(a, t_hl)
            est = lambda rng, size, k=k: t_hl ** (-k * dynamics.sixvertex_sample(sp, y, rng, size)[:, x, y].astype(float))
        else:
            raise UsageError(f"unknown model {model!r}")
        mc = dynamics.monte_carlo(est, R, cfg["seed"] + k, threads=int(cfg["threads"]))
        z = abs(exact - mc.mean) / mc.stderr
        rows.append({"k": k, "formula_value": exact, "mc_mean": mc.mean, "mc_stderr": mc.stderr,
                     "z_score": z, "passed": z < zmax})
    return ["k", "formula_value", "mc_mean", "mc_stderr", "z_score", "passed"], rows, all(r["passed"] for r in rows)


def cmd_laplace(cfg: dict):
    p = _polymer(cfg.get("params", {}))
    us = [float(u) for u in cfg.get("us", [0.1, 1.0, 10.0])]
    R = int(cfg.get("replicas", 1_000_000))
    zmax = cfg["tolerances"]["z_score"]
    rows = []
    for i, u in enumerate(us):
        exact = integrals.laplace_loggamma_nfold(u, p.t, p.n, p.alphas, p.alpha0)
        est = lambda rng, size, u=u: np.exp(-u * np.exp(dynamics.loggamma_log_partition(p, rng, size)))
        mc = dynamics.monte_carlo(est, R, cfg["seed"] + i, threads=int(cfg["threads"]))
        z = abs(exact - mc.mean) / mc.stderr
        rows.append({"u": u, "formula_value": exact, "mc_mean": mc.mean, "mc_stderr": mc.stderr,
                     "z_score": z, "passed": z < zmax})
    return ["u", "formula_value", "mc_mean", "mc_stderr", "z_score", "passed"], rows, all(r["passed"] for r in rows)


def cmd_tw(cfg: dict):
    xs = [float(x) for x in cfg.get("xs", list(np.linspace(-4, 2, 13)))]
    nodes = int(cfg.get("nodes", pfaffian.DEFAULT_NODES))
    check = bool(cfg.get("series_check", True))
    tol = cfg["tolerances"]["scheme_gap"]
    rows = []
    for x in xs:
        goe = pfaffian.f_goe(x, nodes)
        gse = pfaffian.f_gse(x, nodes)
        gap = 0.0
        if check:
            gap = max(abs(goe - pfaffian.f_goe(x, nodes, scheme="series")),
                      abs(gse - pfaffian.f_gse(x, nodes, scheme="series")))
        rows.append({"x": x, "F_GOE": goe, "F_GSE": gse, "Gaussian": pfaffian.gaussian_cdf(x),
                     "scheme_gap": gap, "passed": gap < tol})
    mono = all(np.all(np.diff([r[c] for r in rows]) >= -1e-12) for c in ("F_GOE", "F_GSE")) if sorted(xs) == xs else True
    return ["x", "F_GOE", "F_GSE", "Gaussian", "scheme_gap", "passed"], rows, mono and all(r["passed"] for r in rows)


def phase_experiment(alpha: float, alpha0: float, n: int, replicas: int, seed: int):
    """Rescaled ``log Z(n, n)`` samples, the KS distance to the regime's limit and the mean offset."""
    pc = pfaffian.phase_constants(alpha, alpha0)
    p = dynamics.PolymerParams.homogeneous(alpha, alpha0, n, n)
    lz = dynamics.loggamma_log_partition(p, qdist.split(seed, n), replicas)
    x = (lz - pc.f * n) / (pc.sigma * n**pc.exponent)
    return pc, stats.ks_distance(x, pfaffian.limit_cdf(pc.regime)), float(np.mean(x)), float(np.std(x) / np.sqrt(x.size))


PHASE_HEADER = ["n", "regime", "ks_distance", "ks_pvalue", "mean_shift", "mean_stderr"]


def cmd_phase(cfg: dict):
    alpha, alpha0 = float(_need(cfg, "alpha")), float(_need(cfg, "alpha0"))
    ns = [int(n) for n in cfg.get("ns", [64, 128, 256])]
    R = int(cfg.get("replicas", 5000))
    cap = float(cfg.get("max_cells", 5e8))
    tol = cfg["tolerances"]
    rows = []
    for n in ns:
        if n * n / 2 * R > cap:
            rows.append({"n": n, "regime": "TRUNCATED", "ks_distance": float("nan"), "ks_pvalue": float("nan"),
                         "mean_shift": float("nan"), "mean_stderr": float("nan")})
            continue
        pc, ks, shift, err = phase_experiment(alpha, alpha0, n, R, cfg["seed"])
        rows.append({"n": n, "regime": pc.regime, "ks_distance": ks, "ks_pvalue": stats.ks_pvalue(ks, R),
                     "mean_shift": shift, "mean_stderr": err})
    done = [r for r in rows if r["regime"] != "TRUNCATED"]
    if not done:
        return PHASE_HEADER, rows, False
    if done[0]["regime"] == "GAUSSIAN":
        ok = done[-1]["ks_distance"] < tol["ks_gaussian"]
    else:
        ks = [r["ks_distance"] for r in done]
        ok = all(b < a for a, b in zip(ks, ks[1:])) and ks[-1] < tol["ks_tracy_widom"]
    return PHASE_HEADER, rows, ok and len(done) == len(rows)


COMMANDS = {"verify": cmd_verify, "sample": cmd_sample, "moments": cmd_moments,
            "laplace": cmd_laplace, "tw": cmd_tw, "phase": cmd_phase}


# ------------------------------------------------------------------ output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(command: str, cfg: dict, header, rows, passed: bool, runtime: float, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{command}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(h, "")) for h in header])
    blob = json.dumps(cfg, sort_keys=True)
    record = {
        "experiment_id": f"{command}-{hashlib.sha256(blob.encode()).hexdigest()[:12]}",
        "command": command,
        "inputs": cfg,
        "outputs": [{k: (_json_num(v)) for k, v in r.items()} for r in rows],
        "passed": bool(passed),
        "runtime_s": runtime,
        "version": __version__,
    }
    (out / f"{command}.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _json_num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.seed, args.threads)
        t0 = time.perf_counter()
        header, rows, passed = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_outputs(args.command, cfg, header, rows, passed, time.perf_counter() - t0, Path(args.out))
    for r in rows:
        if "passed" in r:
            label = r.get("check", r.get("k", r.get("u", r.get("x", ""))))
            print(f"{'PASS' if r['passed'] else 'FAIL'} {args.command} {label}")
    print(f"{args.command}: {'all checks passed' if passed else 'FAILED'}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
