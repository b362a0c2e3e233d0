"""Uniform super-resolver interface: classical interpolators, the built-in
residual network, and external adapter processes speaking a file protocol.

Adapter protocol: the harness writes a 16-bit PNG and a JSON job descriptor
(input_path, output_path, status_path, scale, params) into a private
workspace, invokes `executable... job.json`, and expects exit 0 plus a JSON
status descriptor {ok, message, wall_time} and an output image at exactly
scale-times the input dims.
"""

from __future__ import annotations

import json
import numpy as np
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import edsr
from .errors import (
    AdapterDimsError,
    AdapterProtocolError,
    AdapterSpawnError,
    AdapterTimeoutError,
    DuplicateBackendError,
    UnknownBackendError,
    UnsupportedScaleError,
    ValidationError,
)
from .raster import Raster, load_raster, save_raster
from .resample import resize_raster

SUPPORTED_SCALES = (2, 3, 4)


@dataclass(frozen=True)
class SrRequest:
    input: Raster
    scale: int
    backend_id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scale not in SUPPORTED_SCALES:
            raise ValidationError(f"scale must be one of {SUPPORTED_SCALES}, got {self.scale}")


@dataclass(frozen=True)
class SrResult:
    output: Raster
    backend_id: str
    wall_time: float


def select_scale(gsd_product: float, gsd_original: float) -> int:
    """Upscale factor that undoes the GSD degradation."""
    scale = round(gsd_product / gsd_original)
    if scale not in SUPPORTED_SCALES:
        raise UnsupportedScaleError(
            f"gsd ratio {gsd_product / gsd_original:.3g} rounds to x{scale}, "
            f"outside supported factors {SUPPORTED_SCALES}"
        )
    return scale


class ClassicalBackend:
    """Stateless interpolation upscaler (nearest/bilinear/bicubic/lanczos3)."""

    def __init__(self, kind: str):
        self.kind = kind

    def upscale(self, image: Raster, scale: int, params: dict) -> Raster:
        return resize_raster(
            image, image.height * scale, image.width * scale, self.kind, gsd=image.gsd / scale
        )


class EdsrBackend:
    """Built-in residual-network inference; weights from params or preloaded."""

    def __init__(self, store: edsr.WeightStore | None = None):
        self._store = store

    def _resolve(self, scale: int, params: dict) -> edsr.WeightStore:
        if self._store is not None:
            return self._store
        weights = params.get("weights")
        if not weights:
            raise ValidationError("edsr backend needs a 'weights' param or a preloaded store")
        config = edsr.ModelConfig(
            scale=scale,
            n_blocks=int(params.get("n_blocks", 8)),
            n_feats=int(params.get("n_feats", 32)),
            kernel_size=int(params.get("kernel_size", 3)),
            residual_scaling=float(params.get("residual_scaling", 1.0)),
        )
        return edsr.load_weights(weights, config)

    def upscale(self, image: Raster, scale: int, params: dict) -> Raster:
        store = self._resolve(scale, params)
        if store.config.scale != scale:
            raise UnsupportedScaleError(
                f"loaded weights are for x{store.config.scale}, requested x{scale}"
            )
        return edsr.forward(store, image)


class ExternalBackend:
    """Spawns an adapter process per request inside an isolated workspace."""

    def __init__(self, argv: list[str], timeout: float = 60.0):
        if not argv:
            raise ValidationError("external backend needs a non-empty argv")
        self.argv = list(argv)
        self.timeout = timeout

    def upscale(self, image: Raster, scale: int, params: dict) -> Raster:
        workspace = Path(tempfile.mkdtemp(prefix="tradescope-adapter-"))
        try:
            input_path = workspace / "input.png"
            output_path = workspace / "output.png"
            status_path = workspace / "status.json"
            job_path = workspace / "job.json"
            save_raster(image, input_path, bit=16)
            job = {
                "input_path": str(input_path),
                "output_path": str(output_path),
                "status_path": str(status_path),
                "scale": scale,
                "params": {k: v for k, v in params.items() if k != "timeout"},
            }
            job_path.write_text(json.dumps(job, indent=2))
            timeout = float(params.get("timeout", self.timeout))
            try:
                proc = subprocess.run(
                    self.argv + [str(job_path)],
                    capture_output=True,
                    timeout=timeout,
                )
            except FileNotFoundError as exc:
                raise AdapterSpawnError(f"cannot spawn adapter {self.argv[0]!r}: {exc}") from exc
            except subprocess.TimeoutExpired as exc:
                raise AdapterTimeoutError(
                    f"adapter exceeded {timeout:g} s timeout"
                ) from exc
            if proc.returncode != 0:
                raise AdapterProtocolError(
                    f"adapter exited {proc.returncode}: {proc.stderr.decode(errors='replace')[:500]}"
                )
            try:
                status = json.loads(status_path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise AdapterProtocolError(f"malformed or missing status descriptor: {exc}") from exc
            if not isinstance(status, dict) or "ok" not in status:
                raise AdapterProtocolError(f"status descriptor lacks 'ok' flag: {status!r}")
            if not status["ok"]:
                raise AdapterProtocolError(f"adapter reported failure: {status.get('message')}")
            if not output_path.exists():
                raise AdapterProtocolError("adapter exited 0 but wrote no output image")
            out = load_raster(output_path, gsd=image.gsd / scale)
            if (out.height, out.width) != (image.height * scale, image.width * scale):
                raise AdapterDimsError(
                    f"adapter output {out.width}x{out.height} violates the x{scale} dims contract"
                )
            return out
        finally:
            shutil.rmtree(workspace, ignore_errors=True)


class BackendRegistry:
    def __init__(self):
        self._backends: dict[str, object] = {}

    def register(self, backend_id: str, backend) -> None:
        if backend_id in self._backends:
            raise DuplicateBackendError(f"backend {backend_id!r} already registered")
        self._backends[backend_id] = backend

    def get(self, backend_id: str):
        try:
            return self._backends[backend_id]
        except KeyError:
            raise UnknownBackendError(
                f"unknown backend {backend_id!r}; registered: {sorted(self._backends)}"
            ) from None

    def ids(self) -> list[str]:
        return sorted(self._backends)


def default_registry() -> BackendRegistry:
    registry = BackendRegistry()
    for kind in ("nearest", "bilinear", "bicubic", "lanczos3"):
        registry.register(kind, ClassicalBackend(kind))
    registry.register("edsr", EdsrBackend())
    return registry


def upscale(request: SrRequest, registry: BackendRegistry | None = None) -> SrResult:
    registry = registry or default_registry()
    backend = registry.get(request.backend_id)
    start = time.perf_counter()
    output = backend.upscale(request.input, request.scale, request.params)
    wall = time.perf_counter() - start
    if (output.height, output.width) != (
        request.input.height * request.scale,
        request.input.width * request.scale,
    ):
        raise AdapterDimsError(
            f"backend {request.backend_id!r} violated the x{request.scale} dims contract"
        )
    output = output.with_data(np.clip(output.data, 0.0, 1.0))
    return SrResult(output=output, backend_id=request.backend_id, wall_time=wall)
