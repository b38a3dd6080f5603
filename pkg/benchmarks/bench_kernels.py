#!/usr/bin/env python3
"""Times the numba-jitted hot kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--repeats 20] [--batch 2]

The dispatch in fitroom.kernels picks one backend per process
(FITROOM_NUMBA=0 forces numpy); this script imports both backends
directly so a single run compares them side by side.
"""

import argparse
import time

import numpy as np

from fitroom.kernels import numba_backend, numpy_backend


def timeit(fn, repeats):
    fn()  # warm-up (JIT compile / cache touch)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--batch", type=int, default=2)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.batch
    x = rng.normal(size=(n, 24, 64, 48))
    w = rng.normal(size=(32, 24, 3, 3))
    gy_conv = rng.normal(size=(n, 32, 64, 48))
    flow = rng.normal(size=(n, 2, 64, 48)) * 3
    ximg = rng.normal(size=(n, 3, 64, 48))
    gy_img = rng.normal(size=ximg.shape)
    gy_big = rng.normal(size=(n, 3, 128, 96))

    cases = [
        ("conv2d forward 24->32 @64x48",
         lambda b: b.conv2d_forward(x, w, 1, 1)),
        ("conv2d backward(input)",
         lambda b: b.conv2d_backward_input(gy_conv, w, 64, 48, 1, 1)),
        ("conv2d backward(weight)",
         lambda b: b.conv2d_backward_weight(x, gy_conv, 3, 3, 1, 1)),
        ("warp forward 3ch @64x48",
         lambda b: b.warp_forward(ximg, flow)),
        ("warp backward",
         lambda b: b.warp_backward(ximg, flow, gy_img)),
        ("resize 64x48 -> 128x96",
         lambda b: b.resize_forward(ximg, 128, 96)),
        ("resize backward",
         lambda b: b.resize_backward(gy_big, 64, 48)),
    ]

    print(f"{'kernel':<32} {'numpy (ms)':>12} {'numba (ms)':>12} {'speedup':>9}")
    for name, call in cases:
        t_np = timeit(lambda: call(numpy_backend), args.repeats) * 1e3
        t_nb = timeit(lambda: call(numba_backend), args.repeats) * 1e3
        print(f"{name:<32} {t_np:>12.3f} {t_nb:>12.3f} {t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
