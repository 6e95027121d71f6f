#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot kernels (delta match finding and LZ token scanning)
plus full frame encode/decode on seeded workloads, verifies both
backends emit identical instruction lists while at it, and prints a
speedup table.

Usage: python benchmarks/bench_backends.py [--blocks N]
"""

import argparse
import random
import time

from blockreduce import _kernels_py
from blockreduce import codec
from blockreduce.backend import BACKEND_NAME
from blockreduce.corpus import BLOCK_SIZE, perturb_block

try:
    from blockreduce import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None


def make_workload(n):
    rng = random.Random(1)
    pairs = []
    for i in range(n):
        kind = i % 3
        if kind == 0:
            ref = rng.randbytes(BLOCK_SIZE)
            tgt = perturb_block(ref, 64, 4, rng)
        elif kind == 1:
            ref = rng.randbytes(BLOCK_SIZE)
            tgt = rng.randbytes(BLOCK_SIZE)
        else:
            pat = rng.randbytes(24)
            ref = (pat * (BLOCK_SIZE // len(pat) + 1))[:BLOCK_SIZE]
            tgt = perturb_block(ref, 128, 4, rng)
        pairs.append((tgt, ref))
    return pairs


def bench(fn, args_list, repeat=1):
    t0 = time.perf_counter()
    for _ in range(repeat):
        for args in args_list:
            fn(*args)
    return (time.perf_counter() - t0) / (repeat * len(args_list))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--blocks", type=int, default=120)
    args = parser.parse_args()

    pairs = make_workload(args.blocks)
    singles = [(t,) for t, _ in pairs]

    print(f"active backend: {BACKEND_NAME}; workload: {args.blocks} blocks\n")
    rows = []

    t_py = bench(_kernels_py.delta_instructions, pairs)
    t_lz_py = bench(_kernels_py.lz_tokens, singles)
    if _kernels_cy is not None:
        for tgt, ref in pairs:
            assert _kernels_cy.delta_instructions(tgt, ref) == \
                _kernels_py.delta_instructions(tgt, ref)
            assert _kernels_cy.lz_tokens(tgt) == _kernels_py.lz_tokens(tgt)
        t_cy = bench(_kernels_cy.delta_instructions, pairs, repeat=5)
        t_lz_cy = bench(_kernels_cy.lz_tokens, singles, repeat=5)
        rows.append(("delta_instructions", t_py, t_cy))
        rows.append(("lz_tokens", t_lz_py, t_lz_cy))
    else:
        rows.append(("delta_instructions", t_py, None))
        rows.append(("lz_tokens", t_lz_py, None))

    # frame-level round trips under the active backend
    t_enc = bench(codec.delta_encode, pairs)
    frames = [(codec.delta_encode(t, r), r) for t, r in pairs]
    t_dec = bench(codec.delta_decode, frames)
    t_lc = bench(codec.lossless_compress, singles)
    lfs = [(codec.lossless_compress(t),) for t, _ in pairs]
    t_ld = bench(codec.lossless_decompress, lfs)

    print(f"{'kernel':24s} {'pure-python':>14s} {'cython':>12s} {'speedup':>9s}")
    for name, py, cy in rows:
        if cy is not None:
            print(f"{name:24s} {py * 1e6:>11.1f} us {cy * 1e6:>9.1f} us "
                  f"{py / cy:>8.1f}x")
        else:
            print(f"{name:24s} {py * 1e6:>11.1f} us {'n/a':>12s} {'':>9s}")

    print(f"\nframe ops under the active backend ({BACKEND_NAME}):")
    for name, t in (("delta_encode", t_enc), ("delta_decode", t_dec),
                    ("lossless_compress", t_lc),
                    ("lossless_decompress", t_ld)):
        print(f"  {name:22s} {t * 1e6:>9.1f} us/block")


if __name__ == "__main__":
    main()
