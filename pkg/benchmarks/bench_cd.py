"""Benchmark the compiled coordinate-descent kernel against the fallback.

Both kernels share one contract (see pdsseries._cd_py.cd_solve), so this
times the identical Gram problem through each and checks the solutions
agree along the way.

    python benchmarks/bench_cd.py
    python benchmarks/bench_cd.py --sizes 200x100,500x1000 --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pdsseries import _cd_py
from pdsseries.lasso import BACKEND, LassoConfig, initial_loadings, penalty_level

try:
    from pdsseries import _cd
except ImportError:
    _cd = None


def make_problem(rng: np.random.Generator, n: int, m: int):
    X = rng.standard_normal((n, m))
    beta = np.zeros(m)
    support = rng.choice(m, size=max(1, m // 20), replace=False)
    beta[support] = rng.standard_normal(support.size) * 2.0
    y = X @ beta + rng.standard_normal(n)
    lam = penalty_level(n, 1, m, LassoConfig(gamma=0.1))
    return X.T @ X, X.T @ y, lam, initial_loadings(X, y)


def time_kernel(kernel, problem, repeats: int) -> tuple[float, np.ndarray]:
    gram, xty, lam, pen = problem
    best = float("inf")
    coef = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        coef, _, converged = kernel.cd_solve(gram, xty, lam, pen, 10_000, 1e-8)
        best = min(best, time.perf_counter() - t0)
        assert converged
    return best, coef


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="200x100,500x300,500x1000,1000x2000",
                        help="comma-separated n x m problem sizes")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timed repeats per kernel (best is kept)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _cd is None:
        print("compiled kernel not importable; only timing the fallback")
    print(f"active library backend: {BACKEND}")
    print(f"{'problem':>12} {'compiled':>12} {'python':>12} {'speedup':>9}")

    rng = np.random.default_rng(args.seed)
    for token in args.sizes.split(","):
        n, m = (int(v) for v in token.lower().split("x"))
        problem = make_problem(rng, n, m)
        t_py, coef_py = time_kernel(_cd_py, problem, args.repeats)
        if _cd is None:
            print(f"{token:>12} {'-':>12} {t_py * 1e3:>10.2f}ms {'-':>9}")
            continue
        t_c, coef_c = time_kernel(_cd, problem, args.repeats)
        gap = float(np.abs(coef_c - coef_py).max())
        if gap > 1e-10:
            raise RuntimeError(f"kernels disagree on {token}: max gap {gap:.2e}")
        print(f"{token:>12} {t_c * 1e3:>10.2f}ms {t_py * 1e3:>10.2f}ms "
              f"{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
