/**
 * Separable bicubic resampler matching the harness implementation sample for
 * sample: Keys kernel (a = -0.5), output pixel j samples the input at
 * src = (j + 0.5) * (nIn / nOut) - 0.5, edge taps clamp, every weight row is
 * normalized, and the kernel stretches when minifying.
 */

import { Image } from "./png";

function cubic(x: number): number {
  const ax = Math.abs(x);
  if (ax <= 1) {
    return (1.5 * ax - 2.5) * ax * ax + 1.0;
  }
  if (ax < 2) {
    return ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0;
  }
  return 0.0;
}

export function bicubicWeights(nIn: number, nOut: number): Float64Array[] {
  if (nIn < 1 || nOut < 1) {
    throw new Error("resample dims must be >= 1");
  }
  const ratio = nIn / nOut;
  const scale = Math.max(ratio, 1.0);
  const support = 2.0;
  const rows: Float64Array[] = [];
  for (let j = 0; j < nOut; j++) {
    const row = new Float64Array(nIn);
    const src = (j + 0.5) * ratio - 0.5;
    const lo = Math.floor(src - support * scale) + 1;
    const hi = Math.ceil(src + support * scale);
    let sum = 0.0;
    for (let t = lo; t <= hi; t++) {
      const w = cubic((t - src) / scale);
      const idx = Math.min(Math.max(t, 0), nIn - 1);
      row[idx] += w;
    }
    for (let i = 0; i < nIn; i++) sum += row[i];
    for (let i = 0; i < nIn; i++) row[i] /= sum;
    rows.push(row);
  }
  return rows;
}

export function resizeBicubic(image: Image, outH: number, outW: number): Image {
  const { width, height, channels, data } = image;
  const rowW = bicubicWeights(height, outH);
  const colW = bicubicWeights(width, outW);
  // vertical pass
  const tmp = new Float64Array(outH * width * channels);
  for (let y = 0; y < outH; y++) {
    const weights = rowW[y];
    for (let h = 0; h < height; h++) {
      const w = weights[h];
      if (w === 0) continue;
      const srcBase = h * width * channels;
      const dstBase = y * width * channels;
      for (let i = 0; i < width * channels; i++) {
        tmp[dstBase + i] += w * data[srcBase + i];
      }
    }
  }
  // horizontal pass
  const out = new Float64Array(outH * outW * channels);
  for (let y = 0; y < outH; y++) {
    for (let x = 0; x < outW; x++) {
      const weights = colW[x];
      for (let w = 0; w < width; w++) {
        const wt = weights[w];
        if (wt === 0) continue;
        for (let c = 0; c < channels; c++) {
          out[(y * outW + x) * channels + c] += wt * tmp[(y * width + w) * channels + c];
        }
      }
    }
  }
  for (let i = 0; i < out.length; i++) {
    out[i] = Math.min(Math.max(out[i], 0), 1);
  }
  return { width: outW, height: outH, channels, data: out };
}
