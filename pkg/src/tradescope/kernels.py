"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

Set TRADESCOPE_NO_NUMBA=1 to force the numpy path (also used automatically
when numba is not importable). Both paths are bit-compatible well inside the
1e-9 tolerances the test suite enforces; `benchmarks/bench_kernels.py`
compares their throughput.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

_DISABLED = os.environ.get("TRADESCOPE_NO_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        import numba
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba present in the dev env
        numba = None
else:
    numba = None

USE_NUMBA = numba is not None


def reflect_pad_2d(plane: np.ndarray, pad_y: int, pad_x: int) -> np.ndarray:
    """Mirror padding without edge duplication (np.pad mode='reflect')."""
    return np.pad(plane, ((pad_y, pad_y), (pad_x, pad_x)), mode="reflect")


# ---------------------------------------------------------------------------
# Single-plane 2D convolution (true convolution: kernel flipped)
# ---------------------------------------------------------------------------

def _convolve2d_valid_numpy(padded: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-mode convolution via circular FFT of the padded plane.

    Circular wraparound only contaminates the first k-1 rows/cols of the
    full convolution, which the valid slice discards.
    """
    hp, wp = padded.shape
    kh, kw = kernel.shape
    kpad = np.zeros_like(padded)
    kpad[:kh, :kw] = kernel
    out = np.fft.irfft2(np.fft.rfft2(padded) * np.fft.rfft2(kpad), s=(hp, wp))
    return out[kh - 1 : hp, kw - 1 : wp]


if USE_NUMBA:

    @njit(cache=True, nogil=True, parallel=True, fastmath=True)
    def _convolve2d_valid_numba(padded, kernel):  # pragma: no cover - jitted
        hp, wp = padded.shape
        kh, kw = kernel.shape
        h = hp - kh + 1
        w = wp - kw + 1
        out = np.empty((h, w), dtype=np.float64)
        for y in prange(h):
            for x in range(w):
                acc = 0.0
                for u in range(kh):
                    for v in range(kw):
                        acc += padded[y + kh - 1 - u, x + kw - 1 - v] * kernel[u, v]
                out[y, x] = acc
        return out


def convolve2d_reflect(plane: np.ndarray, kernel: np.ndarray, force_numpy: bool = False) -> np.ndarray:
    """Same-size 2D convolution of one plane with reflection boundary."""
    kh, kw = kernel.shape
    padded = reflect_pad_2d(np.asarray(plane, dtype=np.float64), kh // 2, kw // 2)
    kernel = np.asarray(kernel, dtype=np.float64)
    # FFT route wins for the large PSF kernels the blur stage uses; the jitted
    # direct sum wins for the small kernels in network inference.
    if USE_NUMBA and not force_numpy and kh * kw <= 49:
        return _convolve2d_valid_numba(padded, kernel)
    return _convolve2d_valid_numpy(padded, kernel)


# ---------------------------------------------------------------------------
# Multi-channel cross-correlation (network convolution layers)
# ---------------------------------------------------------------------------

def _correlate_chw_numpy(padded: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    k = weights.shape[2]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))
    out = np.einsum("ihwuv,oiuv->ohw", windows, weights, optimize=True)
    return out + bias[:, None, None]


if USE_NUMBA:

    @njit(cache=True, nogil=True, parallel=True, fastmath=True)
    def _correlate_chw_numba(padded, weights, bias):  # pragma: no cover - jitted
        # Tap-outer / pixel-inner loop order keeps the inner loop a
        # contiguous axpy over image rows, which vectorizes.
        c_out, c_in, k, _ = weights.shape
        h = padded.shape[1] - k + 1
        w = padded.shape[2] - k + 1
        out = np.empty((c_out, h, w), dtype=np.float64)
        for o in prange(c_out):
            for y in range(h):
                for x in range(w):
                    out[o, y, x] = bias[o]
            for i in range(c_in):
                for u in range(k):
                    for v in range(k):
                        wv = weights[o, i, u, v]
                        for y in range(h):
                            for x in range(w):
                                out[o, y, x] += wv * padded[i, y + u, x + v]
        return out


def correlate_chw_reflect(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, force_numpy: bool = False
) -> np.ndarray:
    """Same-spatial-size cross-correlation of a (c, h, w) feature map.

    weights is (c_out, c_in, k, k) with odd k; reflection padding.
    """
    k = weights.shape[2]
    pad = k // 2
    x = np.asarray(x, dtype=np.float64)
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if USE_NUMBA and not force_numpy:
        return _correlate_chw_numba(np.ascontiguousarray(padded), weights, bias)
    return _correlate_chw_numpy(padded, weights, bias)


# ---------------------------------------------------------------------------
# Separable valid-mode filtering (windowed SSIM statistics)
# ---------------------------------------------------------------------------

def separable_valid_filter(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Valid-mode filtering with a symmetric separable 1D window.

    Filters with cv2's SIMD separable path, then crops the border-affected
    margin so the result equals a direct valid-mode convolution.
    """
    taps = np.asarray(taps, dtype=np.float64)
    margin = taps.size // 2
    filtered = cv2.sepFilter2D(np.asarray(plane, dtype=np.float64), cv2.CV_64F, taps, taps)
    return filtered[margin : plane.shape[0] - margin, margin : plane.shape[1] - margin]
