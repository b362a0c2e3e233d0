/**
 * Minimal lossless PNG codec: decodes 8/16-bit grayscale or RGB
 * (non-interlaced), encodes 16-bit RGB. Hand-rolled so the adapter controls
 * sample precision exactly; zlib comes from node's runtime.
 */

import * as zlib from "zlib";

const SIGNATURE = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);

export interface Image {
  width: number;
  height: number;
  channels: number;
  /** row-major h*w*channels samples in [0, 1] */
  data: Float64Array;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Buffer): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(body.length, 0);
  head.write(type, 4, "ascii");
  const crcBuf = Buffer.alloc(4);
  crcBuf.writeUInt32BE(crc32(Buffer.concat([head.subarray(4), body])), 0);
  return Buffer.concat([head, body, crcBuf]);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

function unfilter(raw: Buffer, height: number, rowBytes: number, bpp: number): Buffer {
  const out = Buffer.alloc(height * rowBytes);
  let offset = 0;
  for (let y = 0; y < height; y++) {
    const filter = raw[offset++];
    const row = raw.subarray(offset, offset + rowBytes);
    offset += rowBytes;
    const cur = out.subarray(y * rowBytes, (y + 1) * rowBytes);
    const prev = y > 0 ? out.subarray((y - 1) * rowBytes, y * rowBytes) : null;
    for (let x = 0; x < rowBytes; x++) {
      const left = x >= bpp ? cur[x - bpp] : 0;
      const up = prev ? prev[x] : 0;
      const upLeft = prev && x >= bpp ? prev[x - bpp] : 0;
      let v = row[x];
      switch (filter) {
        case 0:
          break;
        case 1:
          v += left;
          break;
        case 2:
          v += up;
          break;
        case 3:
          v += (left + up) >> 1;
          break;
        case 4:
          v += paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`unsupported PNG filter type ${filter}`);
      }
      cur[x] = v & 0xff;
    }
  }
  return out;
}

export function decodePng(file: Buffer): Image {
  if (!file.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not a PNG file (bad signature)");
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = -1;
  const idat: Buffer[] = [];
  let offset = 8;
  while (offset < file.length) {
    const length = file.readUInt32BE(offset);
    const type = file.toString("ascii", offset + 4, offset + 8);
    const body = file.subarray(offset + 8, offset + 8 + length);
    offset += 12 + length;
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      bitDepth = body[8];
      colorType = body[9];
      if (body[12] !== 0) throw new Error("interlaced PNG is not supported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
  }
  if (colorType !== 0 && colorType !== 2) {
    throw new Error(`unsupported PNG color type ${colorType}; need grayscale or RGB`);
  }
  if (bitDepth !== 8 && bitDepth !== 16) {
    throw new Error(`unsupported PNG bit depth ${bitDepth}`);
  }
  const channels = colorType === 2 ? 3 : 1;
  const bytesPerSample = bitDepth / 8;
  const bpp = channels * bytesPerSample;
  const rowBytes = width * bpp;
  const raw = zlib.inflateSync(Buffer.concat(idat));
  if (raw.length !== height * (rowBytes + 1)) {
    throw new Error("PNG pixel payload has the wrong length");
  }
  const bytes = unfilter(raw, height, rowBytes, bpp);
  const full = bitDepth === 16 ? 65535 : 255;
  const data = new Float64Array(width * height * channels);
  for (let i = 0; i < data.length; i++) {
    const raw16 = bitDepth === 16 ? bytes.readUInt16BE(i * 2) : bytes[i];
    data[i] = raw16 / full;
  }
  return { width, height, channels, data };
}

/** Round-half-up 16-bit quantization, matching the harness convention. */
export function quantize16(value: number): number {
  const clamped = Math.min(Math.max(value, 0), 1);
  return Math.min(Math.floor(clamped * 65535 + 0.5), 65535);
}

export function encodePng16(image: Image): Buffer {
  const { width, height, channels, data } = image;
  if (channels !== 3 && channels !== 1) {
    throw new Error(`cannot encode ${channels}-channel image`);
  }
  const colorType = channels === 3 ? 2 : 0;
  const rowBytes = width * channels * 2;
  const raw = Buffer.alloc(height * (rowBytes + 1));
  let src = 0;
  for (let y = 0; y < height; y++) {
    const base = y * (rowBytes + 1);
    raw[base] = 0; // filter: none, keeps output bytes deterministic
    for (let x = 0; x < width * channels; x++) {
      raw.writeUInt16BE(quantize16(data[src++]), base + 1 + x * 2);
    }
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 16;
  ihdr[9] = colorType;
  const idat = zlib.deflateSync(raw, { level: 6 });
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}
