"""Command-line entry point: degrade, upscale, evaluate, sweep, report,
make-corpus.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 pipeline error,
4 backend error. A YAML config file can mirror every sweep flag; explicit
flags override the file.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import yaml

from . import backends as sr
from . import sweep as sweep_mod
from .degrade import DegradeSpec, degrade
from .errors import (
    BackendError,
    PipelineError,
    RasterIOError,
    TradescopeError,
    ValidationError,
)
from .metrics import evaluate_pair
from .raster import load_manifest, load_raster, save_raster
from .synthetic import generate_corpus

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_PIPELINE = 3
EXIT_BACKEND = 4


@click.group()
def cli():
    """Degrade, super-resolve and evaluate overhead imagery over a trade-space."""


@cli.command("degrade")
@click.option("--in", "input_path", required=True, type=click.Path(), help="Input PNG.")
@click.option("--out", "output_path", required=True, type=click.Path(), help="Output PNG.")
@click.option("--grd", required=True, type=float, help="Ground resolved distance, m.")
@click.option("--snr50", required=True, type=float, help="SNR at half dynamic range.")
@click.option("--gsd-product", required=True, type=float, help="Product GSD, m/px.")
@click.option("--gsd-original", type=float, default=0.6, show_default=True)
@click.option("--gsd-sensor", type=float, default=None, help="Intermediate sensor GSD, m/px.")
@click.option("--bit", type=click.Choice(["8", "16"]), default="8", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resample-down", default="area", show_default=True)
@click.option("--resample-up", default="bicubic", show_default=True)
@click.option("--out-bit", type=click.Choice(["8", "16"]), default="16", show_default=True)
def cmd_degrade(input_path, output_path, grd, snr50, gsd_product, gsd_original,
                gsd_sensor, bit, seed, resample_down, resample_up, out_bit):
    """Run the degradation chain on one image; writes a stage-log sidecar."""
    spec = DegradeSpec(
        gsd_original=gsd_original, gsd_product=gsd_product, grd=grd, snr50=snr50,
        seed=seed, gsd_sensor=gsd_sensor, bit=int(bit),
        resample_down=resample_down, resample_up=resample_up,
    )
    image = load_raster(input_path, gsd=gsd_original)
    result = degrade(image, spec)
    save_raster(result.raster, output_path, bit=int(out_bit))
    sidecar = Path(output_path).with_suffix(".stages.json")
    sidecar.write_text(json.dumps(
        [{"stage": s, "dims": list(d), "checksum": c} for s, d, c in result.stage_log],
        indent=2,
    ) + "\n")
    click.echo(f"degraded image written to {output_path}")


@cli.command("upscale")
@click.option("--in", "input_path", required=True, type=click.Path())
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--backend", default="bicubic", show_default=True)
@click.option("--scale", required=True, type=click.Choice(["2", "3", "4"]))
@click.option("--gsd", type=float, default=1.0, show_default=True, help="Input GSD, m/px.")
@click.option("--weights", type=click.Path(), default=None, help="Weight file for the edsr backend.")
@click.option("--adapter", default=None, help="Adapter command for the external backend.")
@click.option("--timeout", type=float, default=60.0, show_default=True)
@click.option("--param", "params", multiple=True, help="Extra key=value backend params.")
@click.option("--out-bit", type=click.Choice(["8", "16"]), default="16", show_default=True)
def cmd_upscale(input_path, output_path, backend, scale, gsd, weights, adapter,
                timeout, params, out_bit):
    """Super-resolve one image with a registered backend."""
    registry = sr.default_registry()
    backend_params = {}
    for item in params:
        if "=" not in item:
            raise ValidationError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        backend_params[key] = value
    if weights:
        backend_params["weights"] = weights
    if backend == "external":
        if not adapter:
            raise ValidationError("--backend external requires --adapter")
        registry.register("external", sr.ExternalBackend(adapter.split(), timeout=timeout))
    image = load_raster(input_path, gsd=gsd)
    result = sr.upscale(
        sr.SrRequest(input=image, scale=int(scale), backend_id=backend, params=backend_params),
        registry,
    )
    save_raster(result.output, output_path, bit=int(out_bit))
    click.echo(f"upscaled x{scale} via {backend} in {result.wall_time:.3f} s -> {output_path}")


@cli.command("evaluate")
@click.option("--reference", required=True, type=click.Path())
@click.option("--candidate", required=True, type=click.Path())
@click.option("--ref-gsd", type=float, default=1.0, show_default=True)
@click.option("--cand-gsd", type=float, default=None, help="Defaults to --ref-gsd.")
@click.option("--append-to", type=click.Path(), default=None, help="Append a CSV row here.")
def cmd_evaluate(reference, candidate, ref_gsd, cand_gsd, append_to):
    """PSNR/SSIM of a candidate against a reference image."""
    ref = load_raster(reference, gsd=ref_gsd)
    cand = load_raster(candidate, gsd=cand_gsd if cand_gsd else ref_gsd)
    m = evaluate_pair(ref, cand)
    row = ",".join(
        ["mse", "psnr_db", "ssim_global", "ssim_win11"]
    ) + "\n" + ",".join(sweep_mod._fmt(m[k]) for k in ("mse", "psnr_db", "ssim_global", "ssim_win11"))
    click.echo(row)
    if append_to:
        path = Path(append_to)
        header_needed = not path.exists()
        with open(path, "a") as fh:
            if header_needed:
                fh.write("mse,psnr_db,ssim_global,ssim_win11\n")
            fh.write(row.split("\n")[1] + "\n")


def _load_sweep_config(config_path, manifest, backend, seed, gsd_values, grd_values,
                       snr50_values, gsd_sensor, jobs):
    file_cfg = {}
    if config_path:
        try:
            file_cfg = yaml.safe_load(Path(config_path).read_text()) or {}
        except OSError as exc:
            raise RasterIOError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ValidationError("sweep config must be a YAML mapping")

    def pick(flag_value, key, default=None):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, default)

    manifest_path = pick(manifest, "manifest")
    if not manifest_path:
        raise ValidationError("a manifest is required (--manifest or config 'manifest')")
    parsed = load_manifest(manifest_path)

    def parse_values(text, key, default):
        value = pick(text, key, None)
        if value is None:
            return default
        if isinstance(value, str):
            value = [float(v) for v in value.split(",")]
        return tuple(float(v) for v in value)

    config = sweep_mod.SweepConfig(
        manifest=parsed,
        backend_id=pick(backend, "backend", "bicubic"),
        global_seed=int(pick(seed, "seed", 0)),
        gsd_values=parse_values(gsd_values, "gsd_values", sweep_mod.DEFAULT_GSD_VALUES),
        grd_values=parse_values(grd_values, "grd_values", sweep_mod.DEFAULT_GRD_VALUES),
        snr50_values=parse_values(snr50_values, "snr50_values", sweep_mod.DEFAULT_SNR50_VALUES),
        gsd_sensor=pick(gsd_sensor, "gsd_sensor"),
        backend_params=file_cfg.get("backend_params", {}),
        optics=file_cfg.get("optics", {}),
    )
    resolved_jobs = int(pick(jobs, "jobs", 0)) or sweep_mod.default_jobs()
    return config, resolved_jobs


@cli.command("sweep")
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config.")
@click.option("--manifest", type=click.Path(), default=None)
@click.option("--backend", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--gsd-values", default=None, help="Comma-separated m/px list.")
@click.option("--grd-values", default=None, help="Comma-separated m list.")
@click.option("--snr50-values", default=None, help="Comma-separated list.")
@click.option("--gsd-sensor", type=float, default=None)
@click.option("--jobs", type=int, default=None, help="Parallel workers (env TRADESCOPE_JOBS).")
@click.option("--out", "output_path", type=click.Path(), default="records.csv", show_default=True)
def cmd_sweep(config_path, manifest, backend, seed, gsd_values, grd_values,
              snr50_values, gsd_sensor, jobs, output_path):
    """Run the full trade-space grid over every manifest crop."""
    config, resolved_jobs = _load_sweep_config(
        config_path, manifest, backend, seed, gsd_values, grd_values,
        snr50_values, gsd_sensor, jobs,
    )
    records = sweep_mod.run_sweep(config, jobs=resolved_jobs)
    sweep_mod.export_records_csv(records, output_path)
    n_ok = sum(r.ok for r in records)
    click.echo(f"{len(records)} records ({n_ok} ok, {len(records) - n_ok} failed) -> {output_path}")
    if n_ok == 0:
        raise PipelineError("every sweep point failed")


@cli.command("report")
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--figure", type=click.Choice(["box", "crops", "heatmap"]), default="box",
              show_default=True)
@click.option("--metric", default="ssim_global", show_default=True)
@click.option("--snr50", type=float, default=50.0, show_default=True, help="Heatmap slice.")
@click.option("--out", "output_path", type=click.Path(), default=None)
def cmd_report(records_path, figure, metric, snr50, output_path):
    """Derive box statistics or heatmap tables from a records CSV."""
    records = sweep_mod.load_records_csv(records_path)
    if not [r for r in records if r.ok]:
        raise ValidationError("records file contains no successful runs")
    if figure == "heatmap":
        config = None
        gsd_values = sorted({r.point.gsd for r in records})
        grd_values = sorted({r.point.grd for r in records})
        table = sweep_mod.heatmap_table(records, metric, snr50, config)
        click.echo(f"median {metric} at snr50={snr50:g} (rows: gsd, cols: grd)")
        header = "gsd\\grd " + " ".join(f"{g:>9.3g}" for g in grd_values)
        click.echo(header)
        for i, gsd in enumerate(gsd_values):
            cells = " ".join(
                f"{table[i, j]:>9.4f}" if not math.isnan(table[i, j]) else "     (na)"
                for j in range(len(grd_values))
            )
            click.echo(f"{gsd:>7.3g} {cells}")
        if output_path:
            sweep_mod.export_heatmap_csv(table, gsd_values, grd_values, metric, snr50, output_path)
            click.echo(f"heatmap table -> {output_path}")
        return
    group_by = "geography_gsd" if figure == "box" else "geography_crop"
    stats = sweep_mod.aggregate_boxstats(records, group_by=group_by, metric=metric)
    columns = ["geography", "gsd_product"] if figure == "box" else ["geography", "crop_id"]
    click.echo(f"{metric} by {' x '.join(columns)}")
    for s in stats:
        label = " ".join(str(g) for g in s.group)
        click.echo(
            f"{label:>24}  median={s.median:.4f} q1={s.q1:.4f} q3={s.q3:.4f} "
            f"min={s.min:.4f} max={s.max:.4f} n={s.n}"
        )
    if output_path:
        sweep_mod.export_boxstats_csv(stats, output_path, columns)
        click.echo(f"box stats -> {output_path}")


@cli.command("make-corpus")
@click.option("--out", "output_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=1234, show_default=True)
@click.option("--size", type=int, default=192, show_default=True)
@click.option("--gsd", type=float, default=0.6, show_default=True)
def cmd_make_corpus(output_dir, seed, size, gsd):
    """Generate the bundled synthetic corpus and its manifest."""
    manifest = generate_corpus(output_dir, seed=seed, size=size, gsd=gsd)
    click.echo(f"{len(manifest.entries)} crops + manifest.csv -> {output_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return EXIT_VALIDATION
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_VALIDATION
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        return EXIT_VALIDATION
    except (RasterIOError, OSError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return EXIT_BACKEND
    except (PipelineError, TradescopeError) as exc:
        click.echo(f"pipeline error: {exc}", err=True)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
