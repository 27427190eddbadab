/**
 * Minimal PNG codec for 8-bit truecolor images, built on node:zlib.
 *
 * The encoder writes unfiltered RGB scanlines (filter type 0), which every
 * PNG reader accepts.  The decoder handles all five standard scanline
 * filters and both RGB and RGBA input (alpha is dropped), covering files
 * written by common imaging libraries.  Palette, grayscale, sub-byte
 * depths, and interlacing are out of scope and rejected explicitly.
 */

import { deflateSync, inflateSync } from "node:zlib";

import { AdapterError, type RgbImage } from "./types.js";

const SIGNATURE = Uint8Array.from([137, 80, 78, 71, 13, 10, 26, 10]);

const CRC_TABLE = new Uint32Array(256);
for (let n = 0; n < 256; n++) {
  let c = n;
  for (let k = 0; k < 8; k++) {
    c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
  }
  CRC_TABLE[n] = c >>> 0;
}

function crc32(...parts: Uint8Array[]): number {
  let c = 0xffffffff;
  for (const part of parts) {
    for (let i = 0; i < part.length; i++) {
      c = CRC_TABLE[(c ^ part[i]) & 0xff] ^ (c >>> 8);
    }
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(type, 4, "ascii");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(head.subarray(4), data), 0);
  return Buffer.concat([head, data, crc]);
}

/** Encode an RGB image as a PNG byte buffer. */
export function encodePng(image: RgbImage): Buffer {
  const { width, height, pixels } = image;
  if (width <= 0 || height <= 0 || pixels.length !== width * height * 3) {
    throw new AdapterError(
      `cannot encode PNG: pixel buffer length ${pixels.length} does not match ${width}x${height} RGB`);
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // color type: truecolor
  const stride = width * 3;
  const raw = Buffer.alloc(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    raw.set(pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  return Buffer.concat([
    SIGNATURE,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", new Uint8Array(0)),
  ]);
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

function unfilter(raw: Buffer, width: number, height: number, channels: number): Uint8Array {
  const stride = width * channels;
  if (raw.length !== height * (stride + 1)) {
    throw new AdapterError(
      `corrupt PNG: decompressed size ${raw.length}, expected ${height * (stride + 1)}`);
  }
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const cur = y * stride;
    const prev = cur - stride;
    for (let i = 0; i < stride; i++) {
      const left = i >= channels ? out[cur + i - channels] : 0;
      const up = y > 0 ? out[prev + i] : 0;
      const upLeft = y > 0 && i >= channels ? out[prev + i - channels] : 0;
      let value = row[i];
      switch (filter) {
        case 0:
          break;
        case 1:
          value += left;
          break;
        case 2:
          value += up;
          break;
        case 3:
          value += (left + up) >> 1;
          break;
        case 4:
          value += paeth(left, up, upLeft);
          break;
        default:
          throw new AdapterError(`corrupt PNG: unknown scanline filter ${filter}`);
      }
      out[cur + i] = value & 0xff;
    }
  }
  return out;
}

/** Decode a PNG byte buffer into an RGB image (alpha, if present, is dropped). */
export function decodePng(data: Buffer | Uint8Array): RgbImage {
  const buf = Buffer.isBuffer(data) ? data : Buffer.from(data);
  if (buf.length < SIGNATURE.length ||
      !buf.subarray(0, SIGNATURE.length).equals(SIGNATURE)) {
    throw new AdapterError("not a PNG file (bad signature)");
  }
  let offset = SIGNATURE.length;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idat: Buffer[] = [];
  let sawEnd = false;
  while (offset + 8 <= buf.length) {
    const length = buf.readUInt32BE(offset);
    const type = buf.toString("ascii", offset + 4, offset + 8);
    const body = buf.subarray(offset + 8, offset + 8 + length);
    if (body.length !== length) {
      throw new AdapterError(`corrupt PNG: truncated ${type} chunk`);
    }
    if (type === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const bitDepth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (bitDepth !== 8 || (colorType !== 2 && colorType !== 6) || interlace !== 0) {
        throw new AdapterError(
          `unsupported PNG: bit depth ${bitDepth}, color type ${colorType}, interlace ${interlace} ` +
          "(only non-interlaced 8-bit RGB/RGBA is supported)");
      }
      channels = colorType === 2 ? 3 : 4;
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      sawEnd = true;
      break;
    }
    offset += 12 + length;
  }
  if (width === 0 || channels === 0 || idat.length === 0 || !sawEnd) {
    throw new AdapterError("corrupt PNG: missing IHDR, IDAT, or IEND chunk");
  }
  const raw = inflateSync(Buffer.concat(idat));
  const flat = unfilter(raw, width, height, channels);
  if (channels === 3) {
    return { width, height, pixels: flat };
  }
  const pixels = new Uint8Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    pixels[p * 3] = flat[p * 4];
    pixels[p * 3 + 1] = flat[p * 4 + 1];
    pixels[p * 3 + 2] = flat[p * 4 + 2];
  }
  return { width, height, pixels };
}
