"""Contour-integral moments of the half-space log-gamma polymer against simulation."""
import numpy as np

from hslab import dynamics, integrals

ALPHA, ALPHA0 = 6.0, 3.0


def main():
    for t, n in [(1, 1), (2, 2), (3, 2)]:
        p = dynamics.PolymerParams.homogeneous(ALPHA, ALPHA0, t, n)
        for k in (1, 2):
            exact = integrals.moments_loggamma(k, t, n, p.alphas, p.alpha0)
            mc = dynamics.monte_carlo(
                lambda rng, size, k=k: np.exp(k * dynamics.loggamma_log_partition(p, rng, size)), 200_000, seed=k)
            print(f"(t,n)=({t},{n}) k={k}: contour {exact:.6e}  MC {mc.mean:.6e} +- {mc.stderr:.1e}")


if __name__ == "__main__":
    main()
