"""Image representation, dataset manifest, and lossless 8/16-bit PNG I/O.

Intensities live in [0, 1] float internally; bit depth is purely an I/O
property. Quantization uses round-half-up so save/load round trips are
reproducible across implementations.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import cv2
import numpy as np

from .errors import RasterIOError, ValidationError

SUPPORTED_BITS = (8, 16)
_LOSSLESS_EXTS = {".png"}


@dataclass(frozen=True)
class Raster:
    """Immutable multi-channel image in ground coordinates.

    data has shape (height, width, channels), float64 in [0, 1] for any
    stage that declares clamping; gsd is meters per pixel.
    """

    data: np.ndarray
    gsd: float

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValidationError(f"raster data must be (h, w, 1|3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("raster contains non-finite values")
        if not self.gsd > 0:
            raise ValidationError(f"gsd must be positive, got {self.gsd}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "gsd", float(self.gsd))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def with_data(self, data: np.ndarray, gsd: float | None = None) -> "Raster":
        return Raster(data=data, gsd=self.gsd if gsd is None else gsd)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.data.tobytes())
        h.update(np.float64(self.gsd).tobytes())
        return h.hexdigest()[:16]


class Geography(str, Enum):
    BEACH = "beach"
    FOREST = "forest"
    RURAL = "rural"
    RURAL_URBAN = "rural_urban"
    URBAN = "urban"


@dataclass(frozen=True)
class LabeledCrop:
    geography: Geography
    crop_id: int
    raster: Raster

    def __post_init__(self):
        if self.crop_id < 1:
            raise ValidationError(f"crop_id must be >= 1, got {self.crop_id}")


@dataclass
class ManifestEntry:
    path: str
    geography: Geography
    crop_id: int
    gsd_m: float


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValidationError("manifest paths are not unique")

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def load_crop(self, entry: ManifestEntry) -> LabeledCrop:
        raster = load_raster(self.resolve(entry))
        raster = Raster(data=raster.data, gsd=entry.gsd_m)
        return LabeledCrop(geography=entry.geography, crop_id=entry.crop_id, raster=raster)


def load_raster(path: str | os.PathLike, gsd: float = 1.0) -> Raster:
    """Load an 8/16-bit grayscale or RGB PNG, mapping samples to [0, 1]."""
    path = Path(path)
    if path.suffix.lower() not in _LOSSLESS_EXTS:
        raise RasterIOError(f"unsupported (possibly lossy) format: {path.suffix!r}; use PNG")
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise RasterIOError(f"unreadable image file: {path}")
    if arr.dtype == np.uint8:
        full = 255.0
    elif arr.dtype == np.uint16:
        full = 65535.0
    else:
        raise RasterIOError(f"unsupported sample type {arr.dtype} in {path}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[:, :, ::-1]  # BGR -> RGB
    elif arr.ndim == 3 and arr.shape[2] == 4:
        raise RasterIOError(f"alpha channels are not supported: {path}")
    else:
        raise RasterIOError(f"unsupported channel layout {arr.shape} in {path}")
    return Raster(data=arr.astype(np.float64) / full, gsd=gsd)


def quantize(values: np.ndarray, bit: int) -> np.ndarray:
    """Round-half-up quantization of [0, 1] intensities to integer samples."""
    if bit not in SUPPORTED_BITS:
        raise ValidationError(f"bit depth must be one of {SUPPORTED_BITS}, got {bit}")
    full = (1 << bit) - 1
    return np.floor(values * full + 0.5).astype(np.uint16 if bit == 16 else np.uint8)


def save_raster(raster: Raster, path: str | os.PathLike, bit: int = 8) -> None:
    """Write a raster as a lossless PNG at the requested bit depth."""
    path = Path(path)
    if path.suffix.lower() not in _LOSSLESS_EXTS:
        raise RasterIOError(f"refusing non-PNG output: {path.suffix!r}")
    lo, hi = float(raster.data.min()), float(raster.data.max())
    if lo < 0.0 or hi > 1.0:
        raise ValidationError(
            f"intensities outside [0,1] (min={lo:.6g}, max={hi:.6g}); a pipeline stage failed to clamp"
        )
    q = quantize(raster.data, bit)
    if q.shape[2] == 1:
        q = q[:, :, 0]
    else:
        q = np.ascontiguousarray(q[:, :, ::-1])  # RGB -> BGR
    if not cv2.imwrite(str(path), q):
        raise RasterIOError(f"unwritable path: {path}")


def crop_region(raster: Raster, x: int, y: int, w: int, h: int) -> Raster:
    if w < 1 or h < 1:
        raise ValidationError("crop dims must be >= 1")
    if x < 0 or y < 0 or x + w > raster.width or y + h > raster.height:
        raise ValidationError(
            f"crop ({x},{y},{w},{h}) out of bounds for {raster.width}x{raster.height}"
        )
    return raster.with_data(raster.data[y : y + h, x : x + w, :])


_MANIFEST_FIELDS = ["path", "geography", "crop_id", "gsd_m"]


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Read a CSV manifest (path, geography, crop_id, gsd_m) relative to its directory."""
    path = Path(path)
    if not path.exists():
        raise RasterIOError(f"manifest not found: {path}")
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != _MANIFEST_FIELDS:
            raise RasterIOError(f"manifest header must be {','.join(_MANIFEST_FIELDS)}")
        for row in reader:
            try:
                entries.append(
                    ManifestEntry(
                        path=row["path"],
                        geography=Geography(row["geography"]),
                        crop_id=int(row["crop_id"]),
                        gsd_m=float(row["gsd_m"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise RasterIOError(f"bad manifest row {row!r}: {exc}") from exc
    manifest = DatasetManifest(entries=entries, root=path.parent)
    for entry in entries:
        if not manifest.resolve(entry).exists():
            raise RasterIOError(f"manifest references missing file: {entry.path}")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_MANIFEST_FIELDS)
        for e in manifest.entries:
            writer.writerow([e.path, e.geography.value, e.crop_id, f"{e.gsd_m:.9g}"])
