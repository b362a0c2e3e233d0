"""Forward-only inference for a residual super-resolution network.

Architecture: head conv -> n_blocks x (conv-ReLU-conv with a scaled skip)
-> global skip add -> sub-pixel upsampler (conv expanding channels by r^2,
then pixel shuffle; x4 runs two x2 stages) -> tail conv back to 3 channels.
No training machinery; weights come from a binary file or a seeded
initializer for tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import PipelineError, ValidationError
from .kernels import correlate_chw_reflect
from .raster import Raster

_MAGIC = b"TSWT0001"
SUPPORTED_SCALES = (2, 3, 4)


@dataclass(frozen=True)
class ModelConfig:
    scale: int
    n_blocks: int = 8
    n_feats: int = 32
    kernel_size: int = 3
    residual_scaling: float = 1.0

    def __post_init__(self):
        if self.scale not in SUPPORTED_SCALES:
            raise ValidationError(f"scale must be one of {SUPPORTED_SCALES}")
        if self.n_blocks < 1 or self.n_feats < 1:
            raise ValidationError("n_blocks and n_feats must be >= 1")
        if self.kernel_size % 2 == 0:
            raise ValidationError("kernel_size must be odd")

    def upsample_factors(self) -> tuple[int, ...]:
        return (2, 2) if self.scale == 4 else (self.scale,)


def expected_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered tensor manifest implied by a config."""
    k = config.kernel_size
    f = config.n_feats
    shapes = [("head.w", (f, 3, k, k)), ("head.b", (f,))]
    for i in range(config.n_blocks):
        shapes.append((f"block{i}.conv1.w", (f, f, k, k)))
        shapes.append((f"block{i}.conv1.b", (f,)))
        shapes.append((f"block{i}.conv2.w", (f, f, k, k)))
        shapes.append((f"block{i}.conv2.b", (f,)))
    for j, r in enumerate(config.upsample_factors()):
        shapes.append((f"up{j}.w", (f * r * r, f, k, k)))
        shapes.append((f"up{j}.b", (f * r * r,)))
    shapes.append(("tail.w", (3, f, k, k)))
    shapes.append(("tail.b", (3,)))
    return shapes


@dataclass
class WeightStore:
    config: ModelConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        manifest = expected_shapes(self.config)
        if len(self.tensors) != len(manifest):
            raise ValidationError(
                f"weight store has {len(self.tensors)} tensors, expected {len(manifest)}"
            )
        for name, shape in manifest:
            if name not in self.tensors:
                raise ValidationError(f"missing tensor {name!r}")
            if self.tensors[name].shape != shape:
                raise ValidationError(
                    f"tensor {name!r} has shape {self.tensors[name].shape}, expected {shape}"
                )


def init_weights(config: ModelConfig, seed: int = 0) -> WeightStore:
    """He-style random weights; deterministic for a seed. Test/demo use."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in expected_shapes(config):
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            tensors[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return WeightStore(config=config, tensors=tensors)


def conv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-size cross-correlation of a (c, h, w) map; reflection padding."""
    if weights.ndim != 4 or weights.shape[1] != x.shape[0]:
        raise ValidationError(
            f"weight shape {weights.shape} incompatible with input channels {x.shape[0]}"
        )
    return correlate_chw_reflect(x, weights, bias)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def residual_block(
    x: np.ndarray, w1, b1, w2, b2, residual_scaling: float = 1.0
) -> np.ndarray:
    return x + residual_scaling * conv2d(relu(conv2d(x, w1, b1)), w2, b2)


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """(c, h, w) -> (c / r^2, r h, r w); pure rearrangement, channel index
    (co * r + ry) * r + rx maps to output offset (ry, rx)."""
    c, h, w = x.shape
    if c % (r * r) != 0:
        raise ValidationError(f"channels {c} not divisible by r^2 = {r * r}")
    co = c // (r * r)
    return (
        x.reshape(co, r, r, h, w).transpose(0, 3, 1, 4, 2).reshape(co, h * r, w * r)
    )


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Exact inverse of pixel_shuffle."""
    co, hr, wr = x.shape
    if hr % r or wr % r:
        raise ValidationError("spatial dims not divisible by the shuffle factor")
    h, w = hr // r, wr // r
    return x.reshape(co, h, r, w, r).transpose(0, 2, 4, 1, 3).reshape(co * r * r, h, w)


def forward(store: WeightStore, image: Raster) -> Raster:
    """Run the network on a raster; output dims = input dims x scale, clamped."""
    store.validate()
    cfg = store.config
    t = store.tensors
    data = image.data
    if image.channels == 1:
        data = np.repeat(data, 3, axis=2)
    x = np.ascontiguousarray(data.transpose(2, 0, 1))

    x = conv2d(x, t["head.w"], t["head.b"])
    head = x
    for i in range(cfg.n_blocks):
        x = residual_block(
            x,
            t[f"block{i}.conv1.w"], t[f"block{i}.conv1.b"],
            t[f"block{i}.conv2.w"], t[f"block{i}.conv2.b"],
            cfg.residual_scaling,
        )
    x = x + head
    for j, r in enumerate(cfg.upsample_factors()):
        x = pixel_shuffle(conv2d(x, t[f"up{j}.w"], t[f"up{j}.b"]), r)
    x = conv2d(x, t["tail.w"], t["tail.b"])
    if not np.all(np.isfinite(x)):
        raise PipelineError("non-finite activation: weights are corrupt")
    out = np.clip(x.transpose(1, 2, 0), 0.0, 1.0)
    return Raster(data=out, gsd=image.gsd / cfg.scale)


def save_weights(store: WeightStore, path) -> None:
    """Binary format: magic, config echo, shape manifest, raw f32 LE tensors."""
    store.validate()
    cfg = store.config
    manifest = expected_shapes(cfg)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<4Id", cfg.scale, cfg.n_blocks, cfg.n_feats, cfg.kernel_size, cfg.residual_scaling))
        fh.write(struct.pack("<I", len(manifest)))
        for name, shape in manifest:
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", len(shape)))
            fh.write(struct.pack(f"<{len(shape)}I", *shape))
        for name, _ in manifest:
            fh.write(store.tensors[name].astype("<f4").tobytes())


def load_weights(path, config: ModelConfig) -> WeightStore:
    """Load and validate a weight file against the expected manifest."""
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise ValidationError(f"truncated weight file while reading {what}")
        chunk = blob[off : off + n]
        off += n
        return chunk

    if take(len(_MAGIC), "magic") != _MAGIC:
        raise ValidationError("not a weight file (bad magic)")
    scale, n_blocks, n_feats, kernel_size = struct.unpack("<4I", take(16, "config"))
    (residual_scaling,) = struct.unpack("<d", take(8, "config"))
    echoed = ModelConfig(scale=scale, n_blocks=n_blocks, n_feats=n_feats,
                         kernel_size=kernel_size, residual_scaling=residual_scaling)
    if echoed != config:
        raise ValidationError(f"weight file config {echoed} does not match requested {config}")
    (count,) = struct.unpack("<I", take(4, "manifest"))
    manifest = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "manifest"))
        name = take(name_len, "manifest").decode()
        (ndim,) = struct.unpack("<B", take(1, "manifest"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"manifest for {name}"))
        manifest.append((name, shape))
    if manifest != expected_shapes(config):
        raise ValidationError("weight file shape manifest does not match the model config")
    tensors = {}
    for name, shape in manifest:
        n = int(np.prod(shape))
        raw = take(4 * n, f"tensor {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    store = WeightStore(config=config, tensors=tensors)
    store.validate()
    return store
