"""Timing comparison of the per-access fault-injection backends.

Measures flip-mask generation and the fused faulty matmul for the compiled
kernel vs the numpy fallback (same RNG, bit-identical masks), with a clean
BLAS matmul as the fault-free reference point.

Run: python benchmarks/bench_kernels.py [--rows 768] [--cols 256] ...
"""

import argparse
import time

import numpy as np

from synmem import kernels
from synmem.quantnet import sign_extend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=768, help="bank rows (fan-in)")
    parser.add_argument("--cols", type=int, default=256, help="bank cols (fan-out)")
    parser.add_argument("--samples", type=int, default=64, help="batch rows")
    parser.add_argument("--flippable", type=int, default=5, help="unprotected bits per word")
    parser.add_argument("--p", type=float, default=0.008, help="per-bit flip probability")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    shape = (args.rows, args.cols)
    positions = np.arange(args.flippable, dtype=np.int32)
    patterns = rng.integers(0, 256, shape).astype(np.uint16)
    x = rng.uniform(-1.0, 1.0, (args.samples, args.rows))
    w = sign_extend(patterns, 8).astype(np.float64)
    bank_key, pass_base = 12345, 0

    print(f"bank {shape}, batch {args.samples}, {args.flippable} flippable bits, p={args.p}")
    print(f"compiled backend available: {kernels.HAVE_FASTPATH}")
    print()

    t = best_of(lambda: x @ w, args.repeats)
    print(f"clean BLAS matmul (reference)      {t * 1e3:10.2f} ms")

    t_fb = best_of(
        lambda: kernels.flip_mask_words_fallback(shape, positions, args.p, bank_key, 0),
        args.repeats,
    )
    print(f"flip masks, numpy fallback         {t_fb * 1e3:10.2f} ms")
    if kernels.HAVE_FASTPATH:
        t_c = best_of(
            lambda: kernels.flip_mask_words_fastpath(shape, positions, args.p, bank_key, 0),
            args.repeats,
        )
        print(f"flip masks, compiled               {t_c * 1e3:10.2f} ms   ({t_fb / t_c:.1f}x)")

    t_fb = best_of(
        lambda: kernels.bernoulli_matmul_fallback(
            x, patterns, positions, args.p, bank_key, 8, pass_base
        ),
        args.repeats,
    )
    print(f"faulty matmul, numpy fallback      {t_fb * 1e3:10.2f} ms")
    if kernels.HAVE_FASTPATH:
        t_c = best_of(
            lambda: kernels.bernoulli_matmul_fastpath(
                x, patterns, positions, args.p, bank_key, 8, pass_base
            ),
            args.repeats,
        )
        print(f"faulty matmul, compiled            {t_c * 1e3:10.2f} ms   ({t_fb / t_c:.1f}x)")

        a = kernels.bernoulli_matmul_fallback(x, patterns, positions, args.p, bank_key, 8, 0)
        b = kernels.bernoulli_matmul_fastpath(x, patterns, positions, args.p, bank_key, 8, 0)
        print()
        print(f"backend outputs allclose: {np.allclose(a, b)}")


if __name__ == "__main__":
    main()
