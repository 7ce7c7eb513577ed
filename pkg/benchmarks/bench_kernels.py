"""Time the compiled and pure-Python coordinate-descent kernels on the same problems.

    python benchmarks/bench_kernels.py [--sizes 64,256,1024] [--repeat 3]

Each run solves one LASSO from a cold start at a tenth of the largest useful
penalty and reports the best wall time per backend, the sweep count and the
largest coefficient difference between the two backends.
"""

import argparse
import time

import numpy as np

from loocv._kernels import get_backend
from loocv.datagen import EnsembleSpec, sample_instance
from loocv.lasso import lambda_max


def run(kernel, A, y, lam, tol):
    col_sq = np.einsum("ij,ij->j", A, A)
    x = np.zeros(A.shape[1])
    r = y.copy()
    sweeps, kkt = kernel.cd_lasso(A, r, x, col_sq, lam, tol, 100_000)
    return x, sweeps


def best_time(kernel, A, y, lam, tol, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        x, sweeps = run(kernel, A, y, lam, tol)
        best = min(best, time.perf_counter() - t0)
    return best, x, sweeps


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,256,1024", help="comma-separated N values")
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args(argv)

    try:
        fast = get_backend("cython")
    except ImportError:
        print("compiled backend not built; run `pip install --no-build-isolation -e .` first")
        return 1
    slow = get_backend("python")

    print(f"{'N':>6} {'M':>6} {'sweeps':>7} {'cython s':>10} {'python s':>10} {'speedup':>8} {'max |dx|':>10}")
    for N in (int(s) for s in args.sizes.split(",")):
        inst, _ = sample_instance(EnsembleSpec(N, args.alpha, 0.1, 1.0, 0.01, seed=0))
        A = np.asfortranarray(inst.A)
        lam = 0.1 * lambda_max(inst)
        tc, xc, sweeps = best_time(fast, A, inst.y, lam, args.tol, args.repeat)
        tp, xp, _ = best_time(slow, A, inst.y, lam, args.tol, args.repeat)
        diff = float(np.abs(xc - xp).max())
        print(f"{N:>6} {inst.M:>6} {sweeps:>7} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
