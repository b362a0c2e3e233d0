"""MSE, PSNR and SSIM, plus grid alignment of candidates to the reference.

All metrics operate on unit-scale intensities with dynamic range L = 1 by
default; PSNR is scale-convention invariant (L^2/MSE), so 8-bit DN inputs
with L = 255 give identical dB values. SSIM uses the stabilizers
C1 = (0.01 L)^2 and C2 = (0.03 L)^2, computed per channel and averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernels import separable_valid_filter
from .raster import Raster
from .resample import resize_raster

PSNR_INFINITE = math.inf


@dataclass(frozen=True)
class MetricRecord:
    mse: float
    psnr: float
    ssim: float
    reference_id: str = ""
    candidate_id: str = ""


def _check_dims(reference: Raster, candidate: Raster) -> None:
    if reference.data.shape != candidate.data.shape:
        raise ValidationError(
            f"dimension mismatch: reference {reference.data.shape} vs candidate {candidate.data.shape}"
        )


def align_for_metric(candidate: Raster, reference: Raster) -> Raster:
    """Bicubic-resample the candidate onto the reference pixel grid."""
    if (candidate.height, candidate.width) == (reference.height, reference.width):
        return candidate
    ext_h = abs(candidate.height * candidate.gsd - reference.height * reference.gsd)
    ext_w = abs(candidate.width * candidate.gsd - reference.width * reference.gsd)
    if ext_h > reference.gsd or ext_w > reference.gsd:
        raise ValidationError(
            "candidate and reference cover different ground extents "
            f"(dh={ext_h:.3g} m, dw={ext_w:.3g} m)"
        )
    return resize_raster(candidate, reference.height, reference.width, "bicubic", gsd=reference.gsd)


def mse(reference: Raster, candidate: Raster) -> float:
    _check_dims(reference, candidate)
    diff = reference.data - candidate.data
    return float(np.mean(diff * diff))


def psnr(reference: Raster, candidate: Raster, dynamic_range: float = 1.0) -> float:
    if dynamic_range <= 0:
        raise ValidationError("dynamic_range must be positive")
    err = mse(reference, candidate)
    if err == 0.0:
        return PSNR_INFINITE
    return 10.0 * math.log10(dynamic_range**2 / err)


def _ssim_terms(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    mu_a = a.mean()
    mu_b = b.mean()
    var_a = a.var()
    var_b = b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim_global(reference: Raster, candidate: Raster, dynamic_range: float = 1.0) -> float:
    """Single-window SSIM over the whole image, averaged across channels."""
    _check_dims(reference, candidate)
    if reference.data is candidate.data or np.array_equal(reference.data, candidate.data):
        return 1.0
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    vals = [
        _ssim_terms(reference.data[:, :, c], candidate.data[:, :, c], c1, c2)
        for c in range(reference.channels)
    ]
    return float(np.mean(vals))


def _gaussian_taps(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - size // 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def ssim_windowed(
    reference: Raster, candidate: Raster, dynamic_range: float = 1.0, size: int = 11, sigma: float = 1.5
) -> float:
    """Mean SSIM over sliding Gaussian windows (valid positions only)."""
    _check_dims(reference, candidate)
    if reference.height < size or reference.width < size:
        raise ValidationError(f"image smaller than the {size}x{size} SSIM window")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    taps = _gaussian_taps(size, sigma)
    vals = []
    for c in range(reference.channels):
        a = reference.data[:, :, c]
        b = candidate.data[:, :, c]
        mu_a = separable_valid_filter(a, taps)
        mu_b = separable_valid_filter(b, taps)
        var_a = separable_valid_filter(a * a, taps) - mu_a * mu_a
        var_b = separable_valid_filter(b * b, taps) - mu_b * mu_b
        cov = separable_valid_filter(a * b, taps) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


def evaluate_pair(reference: Raster, candidate: Raster, dynamic_range: float = 1.0) -> dict:
    """All CSV-facing metrics for an aligned pair."""
    aligned = align_for_metric(candidate, reference)
    return {
        "mse": mse(reference, aligned),
        "psnr_db": psnr(reference, aligned, dynamic_range),
        "ssim_global": ssim_global(reference, aligned, dynamic_range),
        "ssim_win11": ssim_windowed(reference, aligned, dynamic_range),
    }
