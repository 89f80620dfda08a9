"""Stochastic six-vertex heights approach the half-line ASEP current.

With a_i = 1 - (1 - t) eps / 2 and n = tau / eps rows, the quantity
n - x - h(n - x, n) converges in law to N_x(tau). The script compares both
against a Gillespie simulation of the ASEP and prints the KS distance.
"""
import math

import numpy as np

from hslab import dynamics, qdist, stats

T_HL, TAU, X, R = 0.4, 2.0, 1, 20_000


def main():
    rng = qdist.make_rng(3)
    asep = np.array([dynamics.asep_currents(dynamics.asep_simulate(T_HL, TAU, rng), [X])[0] for _ in range(R)])
    print(f"ASEP N_{X}({TAU}): mean {asep.mean():.4f}")
    for eps in (0.2, 0.1, 0.05):
        n = int(round(TAU / eps))
        a = 1 - (1 - T_HL) * eps / 2
        h = dynamics.sixvertex_sample(dynamics.SixVertexParams((a,) * n, T_HL), n, qdist.make_rng(4), R)
        v = n - X - h[:, n - X, n]
        d, _ = stats.ks_two_sample(v + 0.0, asep + 0.0)
        print(f"eps={eps:<5} n={n:<3} mean {v.mean():.4f}  KS to ASEP {d:.4f}")


if __name__ == "__main__":
    main()
