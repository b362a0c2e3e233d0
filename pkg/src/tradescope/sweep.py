"""Trade-space sweep: degrade -> super-resolve -> metrics per crop and grid
point, plus box-plot aggregates, heatmap tables and CSV export.

Default grid: gsd_product {1.2, 1.8, 2.4} m, grd {1.2..2.6 step 0.35} m
(the step arithmetic ends the range at 2.6), snr50 {10..100 step 10}.
Each point gets its own RNG seed derived from the global seed and the point
coordinates, so sweeps are reproducible independent of execution order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import backends as sr
from .degrade import DegradeSpec, blur, derive_seed, normalize_counts, poisson_counts, resample
from .errors import TradescopeError, ValidationError
from .metrics import evaluate_pair
from .optics import psf_for_grd
from .raster import DatasetManifest, LabeledCrop
from .resample import RESAMPLE_KINDS

DEFAULT_GSD_VALUES = (1.2, 1.8, 2.4)
DEFAULT_GRD_VALUES = (1.2, 1.55, 1.9, 2.25, 2.6)
DEFAULT_SNR50_VALUES = tuple(float(v) for v in range(10, 101, 10))

RECORD_COLUMNS = [
    "geography", "crop_id", "gsd_product", "grd", "snr50", "scale", "backend",
    "mse", "psnr_db", "ssim_global", "ssim_win11", "status", "seed",
]
BOXSTAT_COLUMNS = ["median", "q1", "q3", "min", "max", "n"]


@dataclass(frozen=True)
class TradeSpacePoint:
    gsd: float
    grd: float
    snr50: float


@dataclass
class SweepConfig:
    manifest: DatasetManifest
    backend_id: str = "bicubic"
    global_seed: int = 0
    gsd_values: tuple = DEFAULT_GSD_VALUES
    grd_values: tuple = DEFAULT_GRD_VALUES
    snr50_values: tuple = DEFAULT_SNR50_VALUES
    bit: int = 8
    gsd_sensor: float | None = None
    backend_params: dict = field(default_factory=dict)
    optics: dict = field(default_factory=dict)  # wavelength/altitude/obscuration overrides
    resample_down: str = "area"
    resample_up: str = "bicubic"

    def __post_init__(self):
        for name in ("gsd_values", "grd_values", "snr50_values"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValidationError(f"{name} must be nonempty")
            if any(v <= 0 for v in values):
                raise ValidationError(f"{name} must be positive")
            if list(values) != sorted(set(values)):
                raise ValidationError(f"{name} must be strictly increasing")
            setattr(self, name, values)
        for name in ("resample_down", "resample_up"):
            if getattr(self, name) not in RESAMPLE_KINDS:
                raise ValidationError(f"{name} must be one of {RESAMPLE_KINDS}")


@dataclass(frozen=True)
class RunRecord:
    geography: str
    crop_id: int
    point: TradeSpacePoint
    scale: int | None
    backend: str
    mse: float | None
    psnr_db: float | None
    ssim_global: float | None
    ssim_win11: float | None
    status: str
    seed: int

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sort_key(self):
        return (self.geography, self.crop_id, self.point.gsd, self.point.grd, self.point.snr50)


def enumerate_points(config: SweepConfig) -> list[TradeSpacePoint]:
    """Cartesian grid in deterministic lexicographic (gsd, grd, snr50) order."""
    return [
        TradeSpacePoint(gsd=g, grd=r, snr50=s)
        for g in config.gsd_values
        for r in config.grd_values
        for s in config.snr50_values
    ]


def _point_seed(config: SweepConfig, crop: LabeledCrop, point: TradeSpacePoint) -> int:
    return derive_seed(
        config.global_seed, point.gsd, point.grd, point.snr50,
        crop.geography.value, crop.crop_id,
    )


def _degrade_spec(config: SweepConfig, crop: LabeledCrop, point: TradeSpacePoint, seed: int) -> DegradeSpec:
    return DegradeSpec(
        gsd_original=crop.raster.gsd,
        gsd_product=point.gsd,
        grd=point.grd,
        snr50=point.snr50,
        seed=seed,
        gsd_sensor=config.gsd_sensor,
        bit=config.bit,
        resample_down=config.resample_down,
        resample_up=config.resample_up,
    )


def _failed(crop: LabeledCrop, point: TradeSpacePoint, backend: str, seed: int, exc: Exception) -> RunRecord:
    return RunRecord(
        geography=crop.geography.value, crop_id=crop.crop_id, point=point,
        scale=None, backend=backend, mse=None, psnr_db=None,
        ssim_global=None, ssim_win11=None,
        status=f"failed: {type(exc).__name__}: {exc}", seed=seed,
    )


def _finish_point(
    crop: LabeledCrop,
    point: TradeSpacePoint,
    config: SweepConfig,
    registry,
    blurred,
) -> RunRecord:
    """Stages after the blur: resample, noise, SR, metrics."""
    seed = _point_seed(config, crop, point)
    spec = _degrade_spec(config, crop, point, seed)
    try:
        scale = sr.select_scale(point.gsd, crop.raster.gsd)
        sensor_gsd = spec.resolved_sensor_gsd()
        sensor = resample(blurred, sensor_gsd, spec.resample_down)
        noisy = normalize_counts(poisson_counts(sensor, spec.snr50, spec.bit, spec.seed))
        kind = spec.resample_up if spec.gsd_product < sensor_gsd else spec.resample_down
        product = resample(noisy, spec.gsd_product, kind)
        result = sr.upscale(
            sr.SrRequest(input=product, scale=scale, backend_id=config.backend_id,
                         params=config.backend_params),
            registry,
        )
        m = evaluate_pair(crop.raster, result.output)
        return RunRecord(
            geography=crop.geography.value, crop_id=crop.crop_id, point=point,
            scale=scale, backend=config.backend_id,
            mse=m["mse"], psnr_db=m["psnr_db"],
            ssim_global=m["ssim_global"], ssim_win11=m["ssim_win11"],
            status="ok", seed=seed,
        )
    except TradescopeError as exc:
        return _failed(crop, point, config.backend_id, seed, exc)


def _optics_kwargs(config: SweepConfig) -> dict:
    allowed = {"wavelength", "altitude", "obscuration"}
    bad = set(config.optics) - allowed
    if bad:
        raise ValidationError(f"unknown optics keys {sorted(bad)}")
    return dict(config.optics)


def run_point(crop: LabeledCrop, point: TradeSpacePoint, config: SweepConfig, registry=None) -> RunRecord:
    """Degrade -> upscale -> metrics for one crop at one trade-space point."""
    registry = registry or sr.default_registry()
    seed = _point_seed(config, crop, point)
    try:
        psf = psf_for_grd(point.grd, target_gsd=crop.raster.gsd, **_optics_kwargs(config))
        blurred = blur(crop.raster, psf)
    except TradescopeError as exc:
        return _failed(crop, point, config.backend_id, seed, exc)
    return _finish_point(crop, point, config, registry, blurred)


def _run_blur_group(config: SweepConfig, entry_index: int, grd: float) -> list[RunRecord]:
    """All points sharing one (crop, grd) cell; the blur is computed once."""
    entry = config.manifest.entries[entry_index]
    crop = config.manifest.load_crop(entry)
    registry = sr.default_registry()
    points = [
        TradeSpacePoint(gsd=g, grd=grd, snr50=s)
        for g in config.gsd_values
        for s in config.snr50_values
    ]
    try:
        psf = psf_for_grd(grd, target_gsd=crop.raster.gsd, **_optics_kwargs(config))
        blurred = blur(crop.raster, psf)
    except TradescopeError as exc:
        return [_failed(crop, p, config.backend_id, _point_seed(config, crop, p), exc) for p in points]
    return [_finish_point(crop, p, config, registry, blurred) for p in points]


def default_jobs() -> int:
    env = os.environ.get("TRADESCOPE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"TRADESCOPE_JOBS must be an integer, got {env!r}") from None
    return 1


def run_sweep(config: SweepConfig, jobs: int | None = None) -> list[RunRecord]:
    """Run the full grid over every manifest crop; canonical record order."""
    if not config.manifest.entries:
        raise ValidationError("manifest has no entries")
    jobs = jobs or default_jobs()
    tasks = [
        (i, grd)
        for i in range(len(config.manifest.entries))
        for grd in config.grd_values
    ]
    records: list[RunRecord] = []
    if jobs <= 1:
        for i, grd in tasks:
            records.extend(_run_blur_group(config, i, grd))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_blur_group, config, i, grd) for i, grd in tasks]
            for future in futures:
                records.extend(future.result())
    records.sort(key=RunRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateStats:
    group: tuple
    median: float
    q1: float
    q3: float
    min: float
    max: float
    n: int


def _boxstats(values: np.ndarray, group: tuple) -> AggregateStats:
    # Quartiles by linear interpolation (type-7), median = mean of central pair.
    return AggregateStats(
        group=group,
        median=float(np.percentile(values, 50)),
        q1=float(np.percentile(values, 25)),
        q3=float(np.percentile(values, 75)),
        min=float(values.min()),
        max=float(values.max()),
        n=int(values.size),
    )


_GROUP_KEYS = {
    "geography": lambda r: (r.geography,),
    "geography_gsd": lambda r: (r.geography, r.point.gsd),
    "geography_crop": lambda r: (r.geography, r.crop_id),
    "gsd_grd": lambda r: (r.point.gsd, r.point.grd),
    "gsd_grd_snr50": lambda r: (r.point.gsd, r.point.grd, r.point.snr50),
    "gsd_snr50": lambda r: (r.point.gsd, r.point.snr50),
}


def aggregate_boxstats(
    records: list[RunRecord], group_by: str = "geography_gsd", metric: str = "ssim_global"
) -> list[AggregateStats]:
    if group_by not in _GROUP_KEYS:
        raise ValidationError(f"group_by must be one of {sorted(_GROUP_KEYS)}")
    key_fn = _GROUP_KEYS[group_by]
    groups: dict[tuple, list[float]] = {}
    for record in records:
        if not record.ok:
            continue
        value = getattr(record, metric)
        if value is None or math.isinf(value):
            continue
        groups.setdefault(key_fn(record), []).append(value)
    if not groups:
        raise ValidationError("no successful records to aggregate")
    return [
        _boxstats(np.asarray(groups[g]), g) for g in sorted(groups)
    ]


def heatmap_table(
    records: list[RunRecord], metric: str, snr50: float, config: SweepConfig | None = None
) -> np.ndarray:
    """(n_gsd, n_grd) matrix of per-cell medians for one snr50 slice.

    Cells with no successful record are NaN, never zero-filled.
    """
    gsd_values = config.gsd_values if config else sorted({r.point.gsd for r in records})
    grd_values = config.grd_values if config else sorted({r.point.grd for r in records})
    slice_records = [r for r in records if r.ok and r.point.snr50 == snr50]
    if not slice_records:
        raise ValidationError(f"no records for snr50={snr50:g}")
    table = np.full((len(gsd_values), len(grd_values)), np.nan)
    for i, gsd in enumerate(gsd_values):
        for j, grd in enumerate(grd_values):
            vals = [
                getattr(r, metric)
                for r in slice_records
                if r.point.gsd == gsd and r.point.grd == grd and getattr(r, metric) is not None
            ]
            if vals:
                table[i, j] = float(np.median(vals))
    return table


def plateau_tables(
    records: list[RunRecord],
    metric: str = "ssim_global",
    snr_low: float = 10.0,
    snr_mid: float = 50.0,
    snr_high: float = 100.0,
    config: SweepConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell saturation deltas: d1 = median(mid) - median(low),
    d2 = median(high) - median(mid)."""
    low = heatmap_table(records, metric, snr_low, config)
    mid = heatmap_table(records, metric, snr_mid, config)
    high = heatmap_table(records, metric, snr_high, config)
    return mid - low, high - mid


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.9g}"
    return str(value)


def export_records_csv(records: list[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([
                r.geography, r.crop_id, _fmt(r.point.gsd), _fmt(r.point.grd),
                _fmt(r.point.snr50), "" if r.scale is None else r.scale, r.backend,
                _fmt(r.mse), _fmt(r.psnr_db), _fmt(r.ssim_global), _fmt(r.ssim_win11),
                r.status, r.seed,
            ])


def load_records_csv(path) -> list[RunRecord]:
    def parse_float(text: str) -> float | None:
        if text == "":
            return None
        if text == "inf":
            return math.inf
        return float(text)

    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_COLUMNS:
            raise ValidationError(f"records CSV header must be {','.join(RECORD_COLUMNS)}")
        for row in reader:
            records.append(
                RunRecord(
                    geography=row["geography"],
                    crop_id=int(row["crop_id"]),
                    point=TradeSpacePoint(
                        gsd=float(row["gsd_product"]), grd=float(row["grd"]),
                        snr50=float(row["snr50"]),
                    ),
                    scale=int(row["scale"]) if row["scale"] else None,
                    backend=row["backend"],
                    mse=parse_float(row["mse"]),
                    psnr_db=parse_float(row["psnr_db"]),
                    ssim_global=parse_float(row["ssim_global"]),
                    ssim_win11=parse_float(row["ssim_win11"]),
                    status=row["status"],
                    seed=int(row["seed"]),
                )
            )
    return records


def export_boxstats_csv(stats: list[AggregateStats], path, group_columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(group_columns + BOXSTAT_COLUMNS)
        for s in stats:
            writer.writerow(
                [_fmt(g) for g in s.group]
                + [_fmt(s.median), _fmt(s.q1), _fmt(s.q3), _fmt(s.min), _fmt(s.max), s.n]
            )


def export_heatmap_csv(
    table: np.ndarray, gsd_values, grd_values, metric: str, snr50: float, path
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gsd_product", "grd", "snr50", f"median_{metric}"])
        for i, gsd in enumerate(gsd_values):
            for j, grd in enumerate(grd_values):
                value = table[i, j]
                writer.writerow([
                    _fmt(float(gsd)), _fmt(float(grd)), _fmt(float(snr50)),
                    "" if math.isnan(value) else _fmt(float(value)),
                ])
