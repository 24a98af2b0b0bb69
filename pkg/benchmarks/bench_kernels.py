"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from ecmoef import kernels


def best_of(fn, repeat):
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    prev = rng.random(20_000)
    yield "upwind_sweep (20k points)", (
        lambda: kernels.upwind_sweep_numba(prev, 1.0, 3.0, 1e-4),
        lambda: kernels.upwind_sweep_numpy(prev, 1.0, 3.0, 1e-4),
    )
    n_seg = rng.integers(50, 200, size=400)
    offsets = np.concatenate([[0], np.cumsum(2 * (n_seg + 1))[:-1]])
    dx, R, L, C = (rng.random(400) + 0.5 for _ in range(4))
    K = -1e-6 * rng.random(400)
    args = (n_seg, offsets, dx, R, L, C, K, 900.0)
    yield f"gas_stencil ({int(n_seg.sum())} segments)", (
        lambda: kernels.gas_stencil_numba(*args),
        lambda: kernels.gas_stencil_numpy(*args),
    )
    W = np.exp(1j * rng.random((96, 97)))
    Z = rng.random((97, 12, 8)) + 1j * rng.random((97, 12, 8))
    yield "projection (12 nodes x 96 steps x 97 freqs x 8 devices)", (
        lambda: kernels.projection_numba(W, Z),
        lambda: kernels.projection_numpy(W, Z),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':58s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, (fast, slow) in cases(rng):
        a = best_of(fast, args.repeat)
        b = best_of(slow, args.repeat)
        print(f"{name:58s} {a * 1e3:8.2f}ms {b * 1e3:8.2f}ms {b / a:7.1f}x")


if __name__ == "__main__":
    main()
