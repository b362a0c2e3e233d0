"""Diffraction model of an occluded circular aperture.

Pupil -> MTF (autocorrelation of the pupil, computed via the Fourier route)
-> PSF (inverse transform of the MTF), plus the mapping between aperture
diameter and ground resolved distance GRD = 1.22 * wavelength * altitude / D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OpticsUnresolvableError, PipelineError, ValidationError

DEFAULT_WAVELENGTH = 560e-9  # m
DEFAULT_ALTITUDE = 500e3  # m
DEFAULT_OBSCURATION = 0.4
DEFAULT_GRID_N = 512
DEFAULT_KERNEL_N = 129  # odd, so PSF kernels have an exact center sample

PSF_ENERGY_FRACTION = 0.9999
_NEG_CLIP = 1e-9  # ringing below this fraction of peak is clipped to zero
_NEG_ENERGY_LIMIT = 1e-6


@dataclass(frozen=True)
class OpticsSpec:
    aperture_diameter: float
    wavelength: float = DEFAULT_WAVELENGTH
    altitude: float = DEFAULT_ALTITUDE
    obscuration: float = DEFAULT_OBSCURATION

    def __post_init__(self):
        if self.wavelength <= 0 or self.altitude <= 0 or self.aperture_diameter <= 0:
            raise ValidationError("wavelength, altitude and aperture diameter must be positive")
        if not 0 <= self.obscuration < 1:
            raise ValidationError(f"obscuration must be in [0, 1), got {self.obscuration}")


@dataclass(frozen=True)
class PupilMask:
    values: np.ndarray  # (n, n) of {0, 1}
    grid_n: int
    outer_radius: float  # grid units


@dataclass(frozen=True)
class Mtf:
    values: np.ndarray  # (n, n) nonnegative, peak-normalized, DC at center
    grid_n: int
    cutoff_radius: float  # grid samples from center to the optical cutoff
    cutoff_frequency: float | None = None  # cycles/m on the ground, when known


@dataclass(frozen=True)
class Psf:
    kernel: np.ndarray  # (m, m) nonnegative, unit sum, centered
    pixel_scale: float  # meters per kernel pixel

    @property
    def support(self) -> int:
        return self.kernel.shape[0]


def grd_from_aperture(spec: OpticsSpec) -> float:
    """Rayleigh-limit ground resolved distance for the aperture."""
    return 1.22 * spec.wavelength * spec.altitude / spec.aperture_diameter


def aperture_from_grd(
    grd: float, wavelength: float = DEFAULT_WAVELENGTH, altitude: float = DEFAULT_ALTITUDE
) -> float:
    if grd <= 0:
        raise ValidationError(f"grd must be positive, got {grd}")
    return 1.22 * wavelength * altitude / grd


def pupil_mask(grid_n: int = DEFAULT_GRID_N, obscuration: float = DEFAULT_OBSCURATION) -> PupilMask:
    """Annular 0/1 pupil; aperture diameter spans half the grid so the
    autocorrelation support (twice the diameter) fits without wraparound."""
    if grid_n < 64 or grid_n % 2:
        raise ValidationError(f"grid_n must be even and >= 64, got {grid_n}")
    if not 0 <= obscuration < 1:
        raise ValidationError(f"obscuration must be in [0, 1), got {obscuration}")
    outer = grid_n / 4.0
    c = grid_n // 2
    yy, xx = np.mgrid[0:grid_n, 0:grid_n]
    r = np.hypot(yy - c, xx - c)
    # Strict outer boundary keeps the mask inside grid_n/2 pixels, so the
    # autocorrelation support fits the grid with no circular aliasing.
    values = ((r > obscuration * outer) & (r < outer)).astype(np.float64)
    return PupilMask(values=values, grid_n=grid_n, outer_radius=outer)


def mtf_from_pupil(pupil: PupilMask) -> Mtf:
    """Peak-normalized autocorrelation of the pupil indicator.

    Computed as the inverse transform of |FFT(pupil)|^2, which equals the
    direct sliding-overlap autocorrelation (Wiener-Khinchin); the direct
    oracle in the test suite guards the equivalence.
    """
    spectrum = np.abs(np.fft.fft2(pupil.values)) ** 2
    ac = np.fft.fftshift(np.fft.ifft2(spectrum).real)
    peak = ac[pupil.grid_n // 2, pupil.grid_n // 2]
    if peak <= 0:
        raise PipelineError("empty pupil: autocorrelation peak is zero")
    values = np.maximum(ac / peak, 0.0)
    return Mtf(values=values, grid_n=pupil.grid_n, cutoff_radius=2.0 * pupil.outer_radius)


def psf_from_mtf(mtf: Mtf, pixel_scale: float = 1.0) -> Psf:
    """Centered real PSF kernel from an MTF grid, clipped and unit-normalized."""
    kernel = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(mtf.values)).real)
    peak = kernel.max()
    if peak <= 0:
        raise PipelineError("degenerate MTF: PSF has no positive peak")
    neg = kernel[kernel < 0]
    total = np.abs(kernel).sum()
    if neg.size and -neg.sum() > _NEG_ENERGY_LIMIT * total:
        raise PipelineError(
            f"PSF negative energy {-neg.sum() / total:.3g} exceeds {_NEG_ENERGY_LIMIT:g}; "
            "MTF construction is inconsistent"
        )
    kernel = np.where(kernel < _NEG_CLIP * peak, np.maximum(kernel, 0.0), kernel)
    kernel = np.maximum(kernel, 0.0)
    kernel /= kernel.sum()
    return Psf(kernel=kernel, pixel_scale=pixel_scale)


def truncate_psf(psf: Psf, energy_fraction: float = PSF_ENERGY_FRACTION) -> Psf:
    """Crop to the smallest centered odd window holding >= energy_fraction, renormalize."""
    kernel = psf.kernel
    n = kernel.shape[0]
    c = n // 2
    total = kernel.sum()
    for half in range(0, c + 1):
        window = kernel[c - half : c + half + 1, c - half : c + half + 1]
        if window.sum() >= energy_fraction * total:
            out = window / window.sum()
            return Psf(kernel=out, pixel_scale=psf.pixel_scale)
    return Psf(kernel=kernel / total, pixel_scale=psf.pixel_scale)


def psf_for_grd(
    grd: float,
    spec: OpticsSpec | None = None,
    target_gsd: float = 1.0,
    *,
    wavelength: float = DEFAULT_WAVELENGTH,
    altitude: float = DEFAULT_ALTITUDE,
    obscuration: float = DEFAULT_OBSCURATION,
    kernel_n: int = DEFAULT_KERNEL_N,
) -> Psf:
    """PSF sampled on the target pixel grid for the requested GRD.

    The annular pupil is drawn directly on the kernel's frequency grid, scaled
    so the implied MTF cutoff (twice the pupil radius) lands at
    D / (wavelength * altitude) cycles/m on the ground for
    D = aperture_from_grd(grd); the PSF is then the pupil's intensity impulse
    response |IFFT(pupil)|^2, which keeps it exactly nonnegative and
    centrosymmetric on the grid.
    """
    if grd <= 0 or target_gsd <= 0:
        raise ValidationError("grd and target_gsd must be positive")
    if spec is not None:
        wavelength, altitude, obscuration = spec.wavelength, spec.altitude, spec.obscuration
    if kernel_n % 2 == 0 or kernel_n < 65:
        raise ValidationError("kernel_n must be odd and >= 65")
    if grd < 2.0 * target_gsd * (1.0 - 1e-12):
        raise OpticsUnresolvableError(
            f"GRD {grd:g} m finer than 2x target GSD {target_gsd:g} m/px: "
            "optics unresolvable on this grid"
        )
    aperture = aperture_from_grd(grd, wavelength, altitude)
    cutoff_freq = aperture / (wavelength * altitude)  # = 1.22 / grd, cycles/m
    # Frequency step of the kernel grid is 1/(kernel_n * gsd); the pupil
    # radius in samples is half the cutoff expressed in those steps.
    r_samples = cutoff_freq * kernel_n * target_gsd / 2.0
    if r_samples < 2.0:
        raise PipelineError(
            f"pupil spans {r_samples:.2f} frequency samples; enlarge kernel_n"
        )
    c = kernel_n // 2
    yy, xx = np.mgrid[0:kernel_n, 0:kernel_n]
    r = np.hypot(yy - c, xx - c)
    pupil = ((r > obscuration * r_samples) & (r <= r_samples)).astype(np.float64)
    amplitude = np.fft.ifft2(np.fft.ifftshift(pupil))
    kernel = np.fft.fftshift(np.abs(amplitude) ** 2)
    kernel /= kernel.sum()
    return truncate_psf(Psf(kernel=kernel, pixel_scale=target_gsd))
