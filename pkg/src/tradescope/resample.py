"""Separable resampling kernels shared by the degradation chain, the classical
SR backends, and metric grid alignment.

Every resampler is expressed as a pair of row/column weight matrices applied
by matmul, so one code path serves arbitrary (non-integer) ratios. Output
pixel j samples the input at src = (j + 0.5) * (n_in / n_out) - 0.5 with
clamped edges; every weight row is normalized to sum to 1, so constant images
are preserved exactly and area averaging preserves the global mean.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .raster import Raster


def _kernel_cubic(x: np.ndarray) -> np.ndarray:
    # Keys bicubic, a = -0.5
    x = np.abs(x)
    out = np.zeros_like(x)
    m1 = x <= 1
    m2 = (x > 1) & (x < 2)
    out[m1] = (1.5 * x[m1] - 2.5) * x[m1] * x[m1] + 1.0
    out[m2] = ((-0.5 * x[m2] + 2.5) * x[m2] - 4.0) * x[m2] + 2.0
    return out


def _kernel_triangle(x: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(x))


def _kernel_lanczos3(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    out = np.sinc(x) * np.sinc(x / 3.0)
    out[x >= 3] = 0.0
    return out


_FILTERS = {
    "bilinear": (_kernel_triangle, 1.0),
    "bicubic": (_kernel_cubic, 2.0),
    "lanczos3": (_kernel_lanczos3, 3.0),
}

RESAMPLE_KINDS = ("nearest", "bilinear", "bicubic", "lanczos3", "area")


def build_weight_matrix(n_in: int, n_out: int, kind: str) -> np.ndarray:
    """(n_out, n_in) weight matrix for one axis of a separable resampler."""
    if n_in < 1 or n_out < 1:
        raise ValidationError("resample dims must be >= 1")
    return _weight_matrix_cached(n_in, n_out, kind)


@lru_cache(maxsize=256)
def _weight_matrix_cached(n_in: int, n_out: int, kind: str) -> np.ndarray:
    ratio = n_in / n_out
    m = np.zeros((n_out, n_in))
    if kind == "nearest":
        for j in range(n_out):
            src = (j + 0.5) * ratio - 0.5
            i = min(max(int(math.floor(src + 0.5)), 0), n_in - 1)
            m[j, i] = 1.0
        return m
    if kind == "area":
        # Output pixel j integrates input interval [j*ratio, (j+1)*ratio).
        for j in range(n_out):
            lo = j * ratio
            hi = (j + 1) * ratio
            i0 = int(math.floor(lo))
            i1 = min(int(math.ceil(hi)), n_in)
            for i in range(i0, i1):
                m[j, i] = min(hi, i + 1) - max(lo, i)
            m[j] /= m[j].sum()
        return m
    if kind not in _FILTERS:
        raise ValidationError(f"unknown resample kind {kind!r}")
    kernel, support = _FILTERS[kind]
    # Stretch the kernel when minifying so it acts as an antialias filter.
    scale = max(ratio, 1.0)
    for j in range(n_out):
        src = (j + 0.5) * ratio - 0.5
        lo = int(math.floor(src - support * scale)) + 1
        hi = int(math.ceil(src + support * scale))
        taps = np.arange(lo, hi + 1)
        w = kernel((taps - src) / scale)
        idx = np.clip(taps, 0, n_in - 1)
        np.add.at(m[j], idx, w)
        m[j] /= m[j].sum()
    return m


def resize_plane(plane: np.ndarray, out_h: int, out_w: int, kind: str) -> np.ndarray:
    rows = build_weight_matrix(plane.shape[0], out_h, kind)
    cols = build_weight_matrix(plane.shape[1], out_w, kind)
    return rows @ plane @ cols.T


def resize_raster(raster: Raster, out_h: int, out_w: int, kind: str, gsd: float | None = None) -> Raster:
    if out_h < 1 or out_w < 1:
        raise ValidationError("resampled output would be smaller than one pixel")
    rows = build_weight_matrix(raster.height, out_h, kind)
    cols = build_weight_matrix(raster.width, out_w, kind)
    out = np.einsum("yh,hwc,xw->yxc", rows, raster.data, cols, optimize=True)
    if gsd is None:
        gsd = raster.gsd * raster.height / out_h
    return Raster(data=np.clip(out, 0.0, 1.0), gsd=gsd)
