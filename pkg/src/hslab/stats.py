"""Goodness-of-fit utilities used by tests and the CLI."""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy import stats

MIN_EXPECTED = 5.0


class Chi2Result(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def ks_distance(samples, cdf: Callable) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_N - F|``.

    ``cdf`` must accept an array.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("need at least one sample")
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_pvalue(distance: float, n: int) -> float:
    """Asymptotic Kolmogorov p-value of a one-sample distance."""
    return float(stats.kstwo.sf(distance, n))


def ks_two_sample(a, b):
    """Two-sample KS statistic and p-value."""
    res = stats.ks_2samp(np.asarray(a), np.asarray(b))
    return float(res.statistic), float(res.pvalue)


def pool_bins(counts, expected, min_expected: float = MIN_EXPECTED):
    """Merge adjacent bins (in order) until each expectation reaches ``min_expected``.

    A trailing under-filled group is merged into the previous group.
    """
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected, dtype=float)
    oc, ec = [], []
    co = ce = 0.0
    for o, e in zip(counts, expected):
        co += o
        ce += e
        if ce >= min_expected:
            oc.append(co)
            ec.append(ce)
            co = ce = 0.0
    if ce > 0 or co > 0:
        if ec:
            oc[-1] += co
            ec[-1] += ce
        else:
            oc.append(co)
            ec.append(ce)
    return np.array(oc), np.array(ec)


def chi2_test(counts, pmf, min_expected: float = MIN_EXPECTED) -> Chi2Result:
    """Pearson chi-square test of observed ``counts`` against probabilities ``pmf``.

    ``pmf`` lists the probabilities of the same bins as ``counts``; any
    missing mass is put in an extra overflow bin with zero count. Bins with
    expectation below ``min_expected`` are pooled with their neighbours.
    """
    counts = np.asarray(counts, dtype=float)
    pmf = np.asarray(pmf, dtype=float)
    if counts.size == 0 or counts.sum() == 0:
        raise ValueError("empty counts")
    if counts.shape != pmf.shape:
        raise ValueError("counts and pmf must have the same shape")
    if np.any(pmf < 0):
        raise ValueError("probabilities must be nonnegative")
    N = counts.sum()
    rest = 1.0 - pmf.sum()
    if rest > 1e-12:
        counts = np.append(counts, 0.0)
        pmf = np.append(pmf, rest)
    if np.any((pmf == 0) & (counts > 0)):
        return Chi2Result(float("inf"), max(int(np.sum(pmf > 0)) - 1, 1), 0.0)
    oc, ec = pool_bins(counts, N * pmf, min_expected)
    if oc.size < 2:
        return Chi2Result(0.0, 0, 1.0)
    stat = float(np.sum((oc - ec) ** 2 / ec))
    dof = oc.size - 1
    return Chi2Result(stat, dof, float(stats.chi2.sf(stat, dof)))


def empirical_counts(values, support) -> np.ndarray:
    """Counts of ``values`` at each point of ``support`` (hashable items)."""
    index = {s: i for i, s in enumerate(support)}
    out = np.zeros(len(support))
    for v in values:
        out[index[v]] += 1
    return out
