"""Compiled vs numpy kernels on surrogate-sized workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and backend, and the speed-up.
"""

import argparse
import timeit

import numpy as np

from gfnuq import kernels
from gfnuq.pce import total_degree_indices


def workloads(rng):
    """(name, args) pairs: design matrices at the surrogate shapes, then W1 on ensemble-sized samples."""
    out = []
    for dim, degree, n in ((2, 7, 50_000), (2, 14, 10_000), (5, 3, 10_000)):
        idx = np.ascontiguousarray(total_degree_indices(dim, degree), dtype=np.int64)
        x = rng.standard_normal((n, dim))
        out.append((f"design_matrix m={dim} d={degree} n={n}", "design_matrix", (kernels.HERMITE, idx, x)))
    for n, k in ((50_000, 100), (10_000, 250)):
        out.append((f"wasserstein1 {n} vs {k}", "wasserstein1", (rng.random(n), rng.random(k))))
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["compiled"] = kernels.compiled_backend
    else:
        print("compiled extension not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}" + "".join(f"{b:>12}" for b in backends) + f"{'speed-up':>10}")
    for label, fn, call_args in workloads(rng):
        times = {}
        for name, mod in backends.items():
            f = getattr(mod, fn)
            times[name] = min(timeit.repeat(lambda: f(*call_args), number=1, repeat=args.repeat))
        row = f"{label:<38}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
