"""Compare the compiled and numpy Wick contraction backends.

Run with ``python benchmarks/bench_kernels.py [--paths N] [--repeat R]``.
"""

import argparse
import time

import numpy as np

from itoseries.coefficients import build_table
from itoseries.kernels import BACKENDS, WickPlan

CASES = [("000", 6, (0, 1, 2)), ("000", 6, (0, 0, 1)), ("0000", 2, (0, 1, 0, 1)), ("00000", 1, (0, 0, 1, 1, 2))]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if "compiled" not in BACKENDS:
        print("compiled backend not built; only the numpy backend is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'pattern':8} {'q':>2} {'labels':16} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8} {'max rel diff':>13}")
    for pattern, q, labels in CASES:
        coeffs = build_table(pattern, q).scaled(1.0)
        # one Gaussian row per distinct label, repeated at the positions sharing it
        pool = rng.standard_normal((args.paths, max(labels) + 1, q + 1))
        z = pool[:, list(labels), :]
        plan = WickPlan(coeffs, labels)
        plan.terms  # term list is built once per plan, outside the timing
        py = plan(z, backend="python")
        cc = plan(z, backend="compiled")
        diff = np.abs(py - cc).max() / np.abs(py).max()
        t_py = best_of(lambda: plan(z, backend="python"), args.repeat)
        t_cc = best_of(lambda: plan(z, backend="compiled"), args.repeat)
        print(f"{pattern:8} {q:>2} {str(labels):16} {1e3 * t_py:10.2f} {1e3 * t_cc:12.2f} {t_py / t_cc:8.1f} {diff:13.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
