"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]

Both implementations are called directly, so the ``TRANSCO_NUMBA`` switch
does not matter here. Compile time is excluded by a warm-up call. Each row
also reports the largest absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from transco import kernels
from transco._accel import NUMBA_AVAILABLE
from transco.linalg import LeastSquares
from transco.transfer import build_transform


def _best(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def ipod_case(n, p, rng):
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    y[: n // 10] += 8.0
    ls = LeastSquares(X)
    lam = np.ascontiguousarray(2.5 * np.sqrt(1.0 - ls.leverage))
    return (ls.U, ls.resid(y), lam, np.zeros(n), 1e-10, 300)


def transco_case(n, p, K, rng):
    X = rng.standard_normal((n, p))
    B = rng.standard_normal((p, K))
    y = X @ (B @ rng.standard_normal(K)) + rng.standard_normal(n)
    y[: n // 10] += 8.0
    c = build_transform(X, B, y)
    L = c.step_scale
    return (c.X, c.Z, c.Z_pinv, y, np.zeros(p), np.zeros(n), 3.0 / L, L, 1e-12, 300)


def lasso_case(n, p, rng):
    X = np.ascontiguousarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:5] = 2.0
    y = X @ beta + rng.standard_normal(n)
    lam = 0.1 * float(np.max(np.abs(X.T @ y)))
    return (X, y, lam, np.zeros(p), 1e-12, 200)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="small sizes only")
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    sizes = [(150, 100), (400, 200)] if args.quick else [(150, 100), (400, 200), (1000, 100)]
    cases = []
    for n, p in sizes:
        cases.append((f"ipod_loop n={n} p={p}", kernels.ipod_loop_nb, kernels.ipod_loop_np,
                      ipod_case(n, p, rng)))
        cases.append((f"transco_loop n={n} p={p} K=5", kernels.transco_loop_nb,
                      kernels.transco_loop_np, transco_case(n, p, 5, rng)))
        cases.append((f"lasso_cd_loop n={n} p={p}", kernels.lasso_cd_loop_nb,
                      kernels.lasso_cd_loop_np, lasso_case(n, p, rng)))

    print(f"{'kernel':<34}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}{'max diff':>11}")
    for name, nb, np_fn, case in cases:
        t_nb, out_nb = _best(nb, case, args.repeat)
        t_np, out_np = _best(np_fn, case, args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
                   for a, b in zip(out_nb, out_np) if np.size(a))
        print(f"{name:<34}{1e3 * t_nb:>10.2f}{1e3 * t_np:>10.2f}{t_np / t_nb:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
