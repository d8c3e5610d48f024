"""Compare the numba and numpy kernel backends on pipeline-sized inputs.

Usage::

    python benchmarks/bench_accel.py [--repeats 5] [--n 2000] [--p 25]

Each kernel is called once per backend to compile/warm up, then timed with
``--repeats`` calls; the table reports the best wall time and the maximum
absolute difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from gprate import _accel
from gprate.gp import GpConfig, gibbs_fit
from gprate.kernel import build_covariance
from gprate.simdata import SimConfig, simulate_genotypes, simulate_phenotype


def best_time(fn, repeats):
    fn()  # warm-up (numba compiles on first call)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    finite = np.isfinite(a) & np.isfinite(b)
    return float(np.max(np.abs(a[finite] - b[finite]))) if finite.any() else 0.0


def cases(n, p, n_sweeps):
    X = simulate_genotypes(n, p, seed=0)
    y = simulate_phenotype(X, SimConfig(n, p, (p - 3, p - 2, p - 1), h2=0.6, seed=1)).y
    K = build_covariance(X).values
    d, U = np.linalg.eigh(K)
    ytil = U.T @ y
    rng = np.random.default_rng(2)
    z = rng.standard_normal((n_sweeps, n))
    chi = rng.chisquare(5 + n, size=n_sweeps)
    return {
        "pairwise_distances": lambda: _accel.pairwise_distances(X.values),
        "squared_distance_matrix": lambda: _accel.squared_distance_matrix(X.values),
        f"gibbs_sweep ({n_sweeps} iters)": lambda: _accel.gibbs_sweep(ytil, np.clip(d, 0, None), z, chi, 0.4, 5 * 0.4),
        "scan_stats": lambda: _accel.scan_stats(X.values, y),
        "gibbs_fit (2000 iters)": lambda: gibbs_fit(y, K, GpConfig(n_iter=2000, burn_in=200, seed=3)).f_draws,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--p", type=int, default=25)
    parser.add_argument("--sweeps", type=int, default=512)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"n={args.n} p={args.p} repeats={args.repeats}")
    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases(args.n, args.p, args.sweeps).items():
        with _accel.backend("numba"):
            t_nb = best_time(fn, args.repeats)
            out_nb = fn()
        with _accel.backend("numpy"):
            t_np = best_time(fn, args.repeats)
            out_np = fn()
        print(f"{name:<28}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.2f}{max_diff(out_nb, out_np):>14.2e}")


if __name__ == "__main__":
    main()
