/**
 * Forward-only inference for the residual super-resolution network, reading
 * the harness weight-file format: 8-byte magic, config echo
 * (scale, n_blocks, n_feats, kernel_size as u32 LE plus residual_scaling as
 * f64 LE), a shape manifest, then raw little-endian f32 tensors.
 */

import { Image } from "./png";

const MAGIC = "TSWT0001";

export interface ModelConfig {
  scale: number;
  nBlocks: number;
  nFeats: number;
  kernelSize: number;
  residualScaling: number;
}

export interface WeightStore {
  config: ModelConfig;
  tensors: Map<string, { shape: number[]; data: Float64Array }>;
}

function upsampleFactors(scale: number): number[] {
  return scale === 4 ? [2, 2] : [scale];
}

function expectedShapes(config: ModelConfig): Array<[string, number[]]> {
  const k = config.kernelSize;
  const f = config.nFeats;
  const shapes: Array<[string, number[]]> = [
    ["head.w", [f, 3, k, k]],
    ["head.b", [f]],
  ];
  for (let i = 0; i < config.nBlocks; i++) {
    shapes.push([`block${i}.conv1.w`, [f, f, k, k]]);
    shapes.push([`block${i}.conv1.b`, [f]]);
    shapes.push([`block${i}.conv2.w`, [f, f, k, k]]);
    shapes.push([`block${i}.conv2.b`, [f]]);
  }
  upsampleFactors(config.scale).forEach((r, j) => {
    shapes.push([`up${j}.w`, [f * r * r, f, k, k]]);
    shapes.push([`up${j}.b`, [f * r * r]]);
  });
  shapes.push(["tail.w", [3, f, k, k]]);
  shapes.push(["tail.b", [3]]);
  return shapes;
}

export function loadWeights(blob: Buffer): WeightStore {
  let offset = 0;
  const take = (n: number, what: string): Buffer => {
    if (offset + n > blob.length) {
      throw new Error(`truncated weight file while reading ${what}`);
    }
    const piece = blob.subarray(offset, offset + n);
    offset += n;
    return piece;
  };
  if (take(8, "magic").toString("ascii") !== MAGIC) {
    throw new Error("not a weight file (bad magic)");
  }
  const configBuf = take(24, "config");
  const config: ModelConfig = {
    scale: configBuf.readUInt32LE(0),
    nBlocks: configBuf.readUInt32LE(4),
    nFeats: configBuf.readUInt32LE(8),
    kernelSize: configBuf.readUInt32LE(12),
    residualScaling: configBuf.readDoubleLE(16),
  };
  if (![2, 3, 4].includes(config.scale)) {
    throw new Error(`weight file declares unsupported scale ${config.scale}`);
  }
  const count = take(4, "manifest").readUInt32LE(0);
  const manifest: Array<[string, number[]]> = [];
  for (let i = 0; i < count; i++) {
    const nameLen = take(2, "manifest").readUInt16LE(0);
    const name = take(nameLen, "manifest").toString("utf8");
    const ndim = take(1, "manifest")[0];
    const shape: number[] = [];
    const dims = take(4 * ndim, `manifest for ${name}`);
    for (let d = 0; d < ndim; d++) shape.push(dims.readUInt32LE(d * 4));
    manifest.push([name, shape]);
  }
  const expected = expectedShapes(config);
  if (JSON.stringify(manifest) !== JSON.stringify(expected)) {
    throw new Error("weight file shape manifest does not match its config");
  }
  const tensors = new Map<string, { shape: number[]; data: Float64Array }>();
  for (const [name, shape] of manifest) {
    const n = shape.reduce((a, b) => a * b, 1);
    const raw = take(4 * n, `tensor ${name}`);
    const data = new Float64Array(n);
    for (let i = 0; i < n; i++) data[i] = raw.readFloatLE(i * 4);
    tensors.set(name, { shape, data });
  }
  return { config, tensors };
}

/** reflect index without edge duplication (mirror around the edge sample) */
function reflect(i: number, n: number): number {
  if (n === 1) return 0;
  const period = 2 * (n - 1);
  let m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

/** same-size cross-correlation of a (c, h, w) map with reflect padding */
function conv2d(
  x: Float64Array,
  cIn: number,
  h: number,
  w: number,
  weights: Float64Array,
  bias: Float64Array,
  cOut: number,
  k: number
): Float64Array {
  const pad = (k - 1) / 2;
  const out = new Float64Array(cOut * h * w);
  for (let o = 0; o < cOut; o++) {
    const oBase = o * h * w;
    for (let y = 0; y < h; y++) {
      for (let xx = 0; xx < w; xx++) {
        out[oBase + y * w + xx] = bias[o];
      }
    }
    for (let i = 0; i < cIn; i++) {
      const iBase = i * h * w;
      for (let u = 0; u < k; u++) {
        for (let v = 0; v < k; v++) {
          const wt = weights[((o * cIn + i) * k + u) * k + v];
          if (wt === 0) continue;
          for (let y = 0; y < h; y++) {
            const sy = reflect(y + u - pad, h);
            for (let xx = 0; xx < w; xx++) {
              const sx = reflect(xx + v - pad, w);
              out[oBase + y * w + xx] += wt * x[iBase + sy * w + sx];
            }
          }
        }
      }
    }
  }
  return out;
}

function pixelShuffle(
  x: Float64Array,
  c: number,
  h: number,
  w: number,
  r: number
): { data: Float64Array; c: number; h: number; w: number } {
  const co = c / (r * r);
  const out = new Float64Array(co * h * r * w * r);
  for (let oc = 0; oc < co; oc++) {
    for (let ry = 0; ry < r; ry++) {
      for (let rx = 0; rx < r; rx++) {
        const ic = (oc * r + ry) * r + rx;
        for (let y = 0; y < h; y++) {
          for (let xx = 0; xx < w; xx++) {
            out[(oc * h * r + y * r + ry) * w * r + xx * r + rx] =
              x[(ic * h + y) * w + xx];
          }
        }
      }
    }
  }
  return { data: out, c: co, h: h * r, w: w * r };
}

export function forward(store: WeightStore, image: Image): Image {
  const cfg = store.config;
  const { width: w, height: h } = image;
  const t = (name: string) => store.tensors.get(name)!;
  const f = cfg.nFeats;
  const k = cfg.kernelSize;

  // HWC [0,1] -> CHW, grayscale promoted to 3 channels
  let x = new Float64Array(3 * h * w);
  for (let c = 0; c < 3; c++) {
    const src = image.channels === 1 ? 0 : c;
    for (let i = 0; i < h * w; i++) {
      x[c * h * w + i] = image.data[i * image.channels + src];
    }
  }

  x = conv2d(x, 3, h, w, t("head.w").data, t("head.b").data, f, k);
  const head = x.slice();
  for (let b = 0; b < cfg.nBlocks; b++) {
    const inner = conv2d(x, f, h, w, t(`block${b}.conv1.w`).data, t(`block${b}.conv1.b`).data, f, k);
    for (let i = 0; i < inner.length; i++) inner[i] = Math.max(inner[i], 0);
    const branch = conv2d(inner, f, h, w, t(`block${b}.conv2.w`).data, t(`block${b}.conv2.b`).data, f, k);
    for (let i = 0; i < x.length; i++) x[i] += cfg.residualScaling * branch[i];
  }
  for (let i = 0; i < x.length; i++) x[i] += head[i];

  let cur = { data: x, c: f, h, w };
  upsampleFactors(cfg.scale).forEach((r, j) => {
    const expanded = conv2d(
      cur.data, cur.c, cur.h, cur.w,
      t(`up${j}.w`).data, t(`up${j}.b`).data, f * r * r, k
    );
    cur = pixelShuffle(expanded, f * r * r, cur.h, cur.w, r);
  });
  const tail = conv2d(cur.data, cur.c, cur.h, cur.w, t("tail.w").data, t("tail.b").data, 3, k);

  // CHW -> HWC, clamped
  const out = new Float64Array(cur.h * cur.w * 3);
  for (let c = 0; c < 3; c++) {
    for (let i = 0; i < cur.h * cur.w; i++) {
      const v = tail[c * cur.h * cur.w + i];
      if (!Number.isFinite(v)) {
        throw new Error("non-finite activation: weights are corrupt");
      }
      out[i * 3 + c] = Math.min(Math.max(v, 0), 1);
    }
  }
  return { width: cur.w, height: cur.h, channels: 3, data: out };
}
