"""Benchmark the compiled tree-growing kernel against the pure-NumPy twin.

Run as:  python benchmarks/bench_boost.py [--n 2000] [--features 20] [--trees 200]

Both backends are exercised through the same boosting driver; the script
reports wall time per fit and verifies the two produce bit-identical
models.
"""

import argparse
import time

import numpy as np

from retrospect import _boost_py, _kernels


def time_backend(impl, X, y, n_trees, depth, reps):
    saved = _kernels._impl
    _kernels._impl = impl
    try:
        t0 = time.perf_counter()
        for _ in range(reps):
            model = _kernels.fit_boost(X, y, n_trees, depth, 0.1)
        elapsed = (time.perf_counter() - t0) / reps
    finally:
        _kernels._impl = saved
    return elapsed, model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--trees", type=int, default=200)
    ap.add_argument("--depth", type=int, default=2)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    X = rng.normal(size=(args.n, args.features))
    logit = 0.8 * X[:, 0] - 0.5 * (X[:, 0] - X[:, 0].mean()) ** 2
    y = (rng.uniform(size=args.n) < 1.0 / (1.0 + np.exp(-logit))).astype(float)

    t_py, m_py = time_backend(_boost_py, X, y, args.trees, args.depth, args.reps)
    print(f"pure-python backend: {t_py * 1e3:9.1f} ms / fit")

    if _kernels.BACKEND != "compiled":
        print("compiled backend not available (install built the fallback only)")
        return

    from retrospect import _boost_c

    t_c, m_c = time_backend(_boost_c, X, y, args.trees, args.depth, args.reps)
    print(f"compiled backend:    {t_c * 1e3:9.1f} ms / fit")
    print(f"speedup:             {t_py / t_c:9.1f}x")

    same = (
        np.array_equal(m_py.features, m_c.features)
        and np.array_equal(m_py.thresholds, m_c.thresholds)
        and np.array_equal(m_py.values, m_c.values)
        and m_py.base_score == m_c.base_score
    )
    print(f"bit-identical models: {same}")
    if not same:
        raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
