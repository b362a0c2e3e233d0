"""Optical/sensor degradation simulator and super-resolution trade-space
evaluation harness for overhead imagery."""

__version__ = "0.1.0"

from .raster import Raster, Geography, LabeledCrop, load_raster, save_raster, crop_region  # noqa: F401
from .optics import OpticsSpec, grd_from_aperture, aperture_from_grd, psf_for_grd  # noqa: F401
from .degrade import DegradeSpec  # noqa: F401
from .metrics import mse, psnr, ssim_global, ssim_windowed, align_for_metric  # noqa: F401
