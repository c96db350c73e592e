"""Benchmark the alignment kernels: numba @njit vs the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_align.py [--pairs 2000] [--len 30] [--alphabet 500]

Times edit_cost (rolling-array distance) and align_ops (full matrix plus
backtrace) over random word-id sequences shaped like ASR utterances.
"""

import argparse
import time

import numpy as np

from nbrescore import _kernels


def make_pairs(rng, n_pairs, mean_len, alphabet):
    pairs = []
    for _ in range(n_pairs):
        m = max(1, int(rng.normal(mean_len, mean_len / 3)))
        n = max(1, int(rng.normal(mean_len, mean_len / 3)))
        pairs.append(
            (
                rng.integers(0, alphabet, size=m).astype(np.int32),
                rng.integers(0, alphabet, size=n).astype(np.int32),
            )
        )
    return pairs


def bench(label, fn, pairs):
    fn(*pairs[0])  # warm-up (JIT compile for the numba path)
    start = time.perf_counter()
    sink = 0
    for ref, hyp in pairs:
        out = fn(ref, hyp)
        sink += int(out) if np.isscalar(out) or out.ndim == 0 else len(out)
    elapsed = time.perf_counter() - start
    rate = len(pairs) / elapsed
    print(f"{label:<28} {elapsed * 1e3:9.1f} ms   {rate:10.0f} pairs/s   (checksum {sink})")
    return elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=2000)
    parser.add_argument("--len", dest="mean_len", type=int, default=30)
    parser.add_argument("--alphabet", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    pairs = make_pairs(rng, args.pairs, args.mean_len, args.alphabet)
    print(
        f"{args.pairs} pairs, mean length {args.mean_len}, "
        f"alphabet {args.alphabet}, numba available: {_kernels.HAVE_NUMBA}"
    )

    t_np_cost = bench("edit_cost numpy", _kernels._edit_cost_numpy, pairs)
    t_np_ops = bench("align_ops numpy", _kernels._align_ops_numpy, pairs)
    if _kernels.HAVE_NUMBA:
        t_nb_cost = bench("edit_cost numba", _kernels._edit_cost_numba, pairs)
        t_nb_ops = bench("align_ops numba", _kernels._align_ops_numba, pairs)
        print(f"speedup edit_cost: {t_np_cost / t_nb_cost:.1f}x")
        print(f"speedup align_ops: {t_np_ops / t_nb_ops:.1f}x")
    else:
        print("numba path disabled (NBRESCORE_PURE_NUMPY set or numba missing)")


if __name__ == "__main__":
    main()
