"""Compiled vs numpy-fallback timings for the hot kernels and a full penalty path.

    python benchmarks/bench_kernels.py [--rows 20000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from homecourt import glm, kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def indicator_design(n, rng):
    """Design shaped like the regression input: home flag, 6+6 indicators, 2 dense columns."""
    gd = rng.integers(0, 6, n)
    home = rng.integers(0, 2, n).astype(float)
    X = np.zeros((n, 15))
    X[:, 0] = home
    X[np.arange(n), 1 + gd] = home
    X[np.arange(n), 7 + gd] = 1.0
    X[:, 13:] = rng.standard_normal((n, 2))
    eta = 2.0 + X @ np.r_[0.12, rng.normal(0, 0.05, 6), rng.normal(0, 0.2, 6), 0.1, 0.05]
    return X, rng.poisson(np.exp(eta)).astype(float)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.BACKEND != "compiled":
        raise SystemExit("compiled kernels are not built; nothing to compare")

    rng = np.random.default_rng(args.seed)
    X, y = indicator_design(args.rows, rng)
    w = rng.uniform(0.5, 2.0, args.rows)
    p = X.shape[1]
    A = rng.standard_normal((p, p))
    H = A @ A.T + p * np.eye(p)
    c = rng.standard_normal(p)
    pen = np.full(p, 0.5)
    a = np.sort(rng.standard_normal(args.rows))
    b = np.sort(rng.standard_normal(args.rows) + 0.1)
    path = glm.lambda_path(X, y, 50)

    cases = {
        "weighted gram": lambda be: (lambda ops=kernels.design_ops(X, be): lambda: ops.gram(w))(),
        "X @ v": lambda be: (lambda ops=kernels.design_ops(X, be): lambda: ops.dot(c))(),
        "X' @ u": lambda be: (lambda ops=kernels.design_ops(X, be): lambda: ops.rdot(w))(),
        "coordinate descent": lambda be: lambda: kernels.cd_quadratic(H, c, np.zeros(p), pen, backend=be),
        "ks statistic": lambda be: lambda: kernels.ks_statistic(a, b, backend=be),
        "lasso path (50 lambdas)": lambda be: lambda: glm.fit_path(X, y, path, backend=be),
    }
    print(f"rows={args.rows} features={p} best of {args.repeat}")
    print(f"{'kernel':<26}{'compiled (ms)':>15}{'python (ms)':>14}{'speedup':>10}")
    for name, make in cases.items():
        tc = best_of(make("compiled"), args.repeat) * 1e3
        tp = best_of(make("python"), args.repeat) * 1e3
        print(f"{name:<26}{tc:>15.3f}{tp:>14.3f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
