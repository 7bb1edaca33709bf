#!/usr/bin/env python3
"""Compare the numba and pure-numpy similarity kernels.

Times the three hot batch operations on synthetic packed fingerprints and
prints a small table.  Run directly:

    python benchmarks/bench_kernels.py [--n 20000] [--width 1024]
"""

import argparse
import time

import numpy as np

from aminegen import kernels_numpy

try:
    from aminegen import kernels_numba
except ImportError:
    kernels_numba = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000,
                        help="number of fingerprints")
    parser.add_argument("--targets", type=int, default=23)
    parser.add_argument("--width", type=int, default=1024)
    parser.add_argument("--sample", type=int, default=1000,
                        help="sphere-exclusion sample size")
    args = parser.parse_args()

    words = args.width // 64
    rng = np.random.default_rng(0)
    # sparse-ish fingerprints: ~60 bits set out of `width`
    mat = np.zeros((args.n, words), dtype=np.uint64)
    for bit_block in range(60):
        rows = np.arange(args.n)
        word = rng.integers(0, words, size=args.n)
        bit = rng.integers(0, 64, size=args.n).astype(np.uint64)
        mat[rows, word] |= np.uint64(1) << bit
    targets = mat[rng.integers(0, args.n, size=args.targets)]
    query = mat[0]
    sample = mat[:args.sample]

    backends = [("numpy", kernels_numpy)]
    if kernels_numba is not None:
        # trigger JIT compilation outside the timed region
        kernels_numba.sims_one_to_many(query, mat[:8])
        kernels_numba.max_sims_to_targets(mat[:8], targets)
        kernels_numba.sphere_exclusion_count(mat[:8], 0.65)
        backends.append(("numba", kernels_numba))
    else:
        print("numba not importable; benchmarking numpy only")

    cases = [
        ("sims_one_to_many", lambda k: k.sims_one_to_many(query, mat)),
        ("max_sims_to_targets", lambda k: k.max_sims_to_targets(mat, targets)),
        ("sphere_exclusion", lambda k: k.sphere_exclusion_count(sample, 0.65)),
    ]

    print(f"n={args.n} width={args.width} targets={args.targets} "
          f"sample={args.sample}")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name, _ in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for case_name, call in cases:
        times = []
        results = []
        for _, module in backends:
            best, result = timeit(call, module)
            times.append(best)
            results.append(result)
        if len(results) == 2:
            a, b = results
            same = (np.array_equal(a, b) if isinstance(a, np.ndarray)
                    else a == b)
            assert same, f"{case_name}: backends disagree"
        row = f"{case_name:<22}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
