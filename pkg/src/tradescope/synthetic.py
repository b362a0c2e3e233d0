"""Bundled synthetic corpus: five geography-like texture families, five crops
each, so the full evaluation suite runs with zero external data.

Textures are built from seeded filtered noise, gradients and block patterns
whose spatial statistics loosely mimic the five geography labels (beach:
smooth gradients; forest: dense mid-frequency texture; rural: large fields;
rural_urban: fields plus scattered structures; urban: dense rectangular
structure). Values are kept inside [0.05, 0.95] so quantization and noise
clamping stay unbiased.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .kernels import convolve2d_reflect
from .raster import (
    DatasetManifest,
    Geography,
    ManifestEntry,
    Raster,
    save_manifest,
    save_raster,
)

DEFAULT_SIZE = 192  # divisible by 12 so every default gsd ratio lands on integers
DEFAULT_GSD = 0.6  # m/px, NAIP-like base
CROPS_PER_GEOGRAPHY = 5


def _gaussian_kernel(sigma: float) -> np.ndarray:
    half = max(1, int(3 * sigma))
    x = np.arange(-half, half + 1)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _smooth_noise(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    noise = rng.standard_normal((n, n))
    out = convolve2d_reflect(noise, _gaussian_kernel(sigma))
    out -= out.min()
    peak = out.max()
    return out / peak if peak > 0 else out


def _norm01(a: np.ndarray) -> np.ndarray:
    a = a - a.min()
    peak = a.max()
    return a / peak if peak > 0 else a


def _beach(rng, n):
    yy, xx = np.mgrid[0:n, 0:n] / n
    shore = _norm01(0.8 * xx + 0.2 * yy + 0.15 * _smooth_noise(rng, n, 8.0))
    dunes = 0.08 * np.sin(2 * np.pi * (3 * yy + 1.5 * xx + _smooth_noise(rng, n, 12.0)))
    base = np.clip(shore + dunes, 0, 1)
    water = base < 0.45
    r = np.where(water, 0.25 + 0.1 * base, 0.75 + 0.15 * base)
    g = np.where(water, 0.35 + 0.1 * base, 0.70 + 0.12 * base)
    b = np.where(water, 0.55 + 0.2 * base, 0.55 + 0.10 * base)
    return np.stack([r, g, b], axis=2)


def _forest(rng, n):
    canopy = _smooth_noise(rng, n, 1.2)
    clearing = _smooth_noise(rng, n, 10.0)
    lum = 0.25 + 0.5 * canopy * (0.6 + 0.4 * clearing)
    return np.stack([0.45 * lum, 0.9 * lum, 0.4 * lum], axis=2) + 0.1


def _fields(rng, n, cell):
    rows = rng.uniform(0.2, 0.9, size=(n // cell + 2, n // cell + 2))
    yy, xx = np.mgrid[0:n, 0:n]
    return rows[yy // cell, xx // cell]


def _rural(rng, n):
    fields = _fields(rng, n, n // 6)
    texture = 0.1 * _smooth_noise(rng, n, 2.0)
    lum = np.clip(0.15 + 0.7 * fields + texture, 0, 1)
    return np.stack([0.8 * lum + 0.1, 0.85 * lum + 0.08, 0.5 * lum + 0.1], axis=2)


def _rectangles(rng, n, count, lo, hi):
    layer = np.zeros((n, n))
    for _ in range(count):
        h = rng.integers(lo, hi)
        w = rng.integers(lo, hi)
        y = rng.integers(0, n - h)
        x = rng.integers(0, n - w)
        layer[y : y + h, x : x + w] = rng.uniform(0.3, 1.0)
    return layer


def _rural_urban(rng, n):
    base = _rural(rng, n)
    buildings = _rectangles(rng, n, 25, n // 48, n // 12)
    mask = buildings > 0
    lum = np.where(mask, 0.2 + 0.7 * buildings, 0.0)
    out = base.copy()
    for c in range(3):
        out[:, :, c] = np.where(mask, lum, base[:, :, c])
    return out


def _urban(rng, n):
    blocks = _rectangles(rng, n, 90, n // 64, n // 16)
    roads = np.zeros((n, n))
    step = n // 8
    roads[::step, :] = 1.0
    roads[:, ::step] = 1.0
    roads = convolve2d_reflect(roads, _gaussian_kernel(0.8))
    lum = np.clip(0.25 + 0.6 * blocks + 0.15 * _smooth_noise(rng, n, 1.0) - 0.3 * _norm01(roads), 0, 1)
    return np.stack([lum, lum * 0.97, lum * 0.92], axis=2) + 0.05


_GENERATORS = {
    Geography.BEACH: _beach,
    Geography.FOREST: _forest,
    Geography.RURAL: _rural,
    Geography.RURAL_URBAN: _rural_urban,
    Geography.URBAN: _urban,
}


def synthetic_crop(
    geography: Geography, crop_id: int, seed: int = 1234, size: int = DEFAULT_SIZE, gsd: float = DEFAULT_GSD
) -> Raster:
    geo_index = list(Geography).index(geography)
    rng = np.random.default_rng([seed, geo_index, crop_id])
    data = _GENERATORS[geography](rng, size)
    # Band-limited detail near the pixel scale gives every texture family
    # content inside the GRD range the optics sweep probes.
    detail = _smooth_noise(rng, size, 1.0) - 0.5
    data = data + 0.22 * detail[:, :, None]
    return Raster(data=np.clip(0.05 + 0.9 * _norm01(data), 0.05, 0.95), gsd=gsd)


def generate_corpus(
    root, seed: int = 1234, size: int = DEFAULT_SIZE, gsd: float = DEFAULT_GSD,
    crops: int = CROPS_PER_GEOGRAPHY,
) -> DatasetManifest:
    """Write PNG crops plus manifest.csv under root; returns the manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for geography in Geography:
        for crop_id in range(1, crops + 1):
            raster = synthetic_crop(geography, crop_id, seed=seed, size=size, gsd=gsd)
            name = f"{geography.value}_{crop_id}.png"
            save_raster(raster, root / name, bit=8)
            entries.append(
                ManifestEntry(path=name, geography=geography, crop_id=crop_id, gsd_m=gsd)
            )
    manifest = DatasetManifest(entries=entries, root=root)
    save_manifest(manifest, root / "manifest.csv")
    return manifest
