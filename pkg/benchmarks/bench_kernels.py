"""Throughput comparison of the jitted and pure-numpy kernel paths.

Run:  python3 benchmarks/bench_kernels.py
The numpy fallback is the same code the package uses under
TRADESCOPE_NO_NUMBA=1; both paths are verified equivalent by the test suite,
this script only measures speed.

The jitted loops parallelize across output channels/rows, so their advantage
scales with core count; on a single-core host the BLAS-backed numpy path is
typically as fast or faster, and TRADESCOPE_NO_NUMBA=1 is a sensible default
there. Measure before choosing.
"""

import time

import numpy as np

from tradescope.kernels import USE_NUMBA, convolve2d_reflect, correlate_chw_reflect


def timeit(fn, repeat=5):
    fn()  # warm-up (includes jit compilation)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_convolve(n, k, rng):
    plane = rng.random((n, n))
    kernel = rng.random((k, k))
    jit = timeit(lambda: convolve2d_reflect(plane, kernel))
    ref = timeit(lambda: convolve2d_reflect(plane, kernel, force_numpy=True))
    print(f"convolve2d {n}x{n} k={k}: jit path {jit * 1e3:8.2f} ms  numpy {ref * 1e3:8.2f} ms  speedup {ref / jit:5.2f}x")


def bench_correlate(c, n, k, rng):
    x = rng.random((c, n, n))
    w = rng.standard_normal((c, c, k, k))
    b = rng.standard_normal(c)
    jit = timeit(lambda: correlate_chw_reflect(x, w, b))
    ref = timeit(lambda: correlate_chw_reflect(x, w, b, force_numpy=True))
    print(f"correlate  {c}ch {n}x{n} k={k}: jit path {jit * 1e3:8.2f} ms  numpy {ref * 1e3:8.2f} ms  speedup {ref / jit:5.2f}x")


def main():
    print(f"numba enabled: {USE_NUMBA}")
    rng = np.random.default_rng(0)
    for n, k in ((192, 5), (192, 7), (512, 7)):
        bench_convolve(n, k, rng)
    # 129x129 blur kernels route to FFT on both paths
    bench_convolve(192, 129, rng)
    for c, n in ((16, 64), (32, 96), (32, 192)):
        bench_correlate(c, n, 3, rng)


if __name__ == "__main__":
    main()
