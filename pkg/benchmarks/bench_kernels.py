"""Benchmark the compiled kernel backend against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--sizes 200,400,800]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from maxcap import kernels
from maxcap.kernels import _npkern

try:
    from maxcap import _fastkern
except ImportError:
    _fastkern = None


def _timeit(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(sizes) -> None:
    rng = np.random.default_rng(7)
    backends = [("numpy", _npkern)]
    if _fastkern is not None:
        backends.append(("compiled", _fastkern))
    print(f"active backend at import: {kernels.BACKEND}")
    header = f"{'kernel':<22}{'n':>6}" + "".join(
        f"{name:>12}" for name, _ in backends
    ) + ("{:>10}".format("speedup") if len(backends) == 2 else "")
    print(header)
    print("-" * len(header))

    for n in sizes:
        nodes = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        gaps = np.full(n, 2.0 / n)
        weights = rng.random(n)
        weights /= weights.sum()
        targets = 3.0 + rng.standard_normal(4 * n) * 1j
        cases = [
            ("log_kernel_matrix", lambda m: m.log_kernel_matrix(nodes, gaps)),
            ("potential_many",
             lambda m: m.potential_many(nodes, weights, targets)),
            ("cauchy_many",
             lambda m: m.cauchy_many(nodes, weights, targets)),
            ("quotient_double_sum",
             lambda m: m.quotient_double_sum(nodes, weights, np.conj(nodes),
                                             np.ones(n, dtype=complex))),
        ]
        for label, call in cases:
            times = [_timeit(call, mod) for _, mod in backends]
            row = f"{label:<22}{n:>6}" + "".join(
                f"{t * 1e3:>10.2f}ms" for t in times
            )
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)

        # agreement audit while we are here
        if len(backends) == 2:
            for label, call in cases:
                a, b = call(backends[0][1]), call(backends[1][1])
                err = np.max(np.abs(np.asarray(a) - np.asarray(b)))
                if err > 1e-10:
                    print(f"  WARNING {label}: backend mismatch {err:.3e}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="200,400,800",
                    help="comma-separated node counts")
    args = ap.parse_args()
    bench([int(s) for s in args.sizes.split(",")])


if __name__ == "__main__":
    main()
