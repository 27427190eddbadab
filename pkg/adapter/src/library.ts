/**
 * Read-only access to a stored noise library.
 *
 * A library is two files sharing a path prefix: <prefix>.meta.jsonl holds a
 * header line followed by one JSON record per noise id, and
 * <prefix>.noise.bin holds the noise tensors as contiguous little-endian
 * 32-bit floats in id order.  The adapter never writes these files; it only
 * reads stored tensors and the header contract (count, shape, semantic_dim).
 */

import { closeSync, openSync, readSync, readFileSync, statSync } from "node:fs";

import { AdapterError } from "./types.js";

export interface LibraryHeader {
  formatVersion: number;
  masterSeed: number;
  count: number;
  noiseShape: number[];
  /** Dimension of the semantic embedding slot, or null if undeclared. */
  semanticDim: number | null;
}

export interface Library {
  header: LibraryHeader;
  /** Feature records in noise id order, as parsed JSON objects. */
  records: Array<Record<string, unknown>>;
  /** Load the stored tensor for one noise id as little-endian f32 values. */
  noiseTensor(id: number): Float32Array;
}

function parseHeader(line: string, path: string): LibraryHeader {
  let obj: Record<string, unknown>;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new AdapterError(`${path}: malformed header: ${(err as Error).message}`);
  }
  const count = obj["count"];
  const shape = obj["noise_shape"];
  const seed = obj["master_seed"];
  const version = obj["format_version"];
  if (typeof count !== "number" || !Array.isArray(shape) ||
      typeof seed !== "number" || typeof version !== "number") {
    throw new AdapterError(`${path}: header is missing required fields`);
  }
  const semantic = obj["semantic_dim"];
  return {
    formatVersion: version,
    masterSeed: seed,
    count,
    noiseShape: shape as number[],
    semanticDim: typeof semantic === "number" ? semantic : null,
  };
}

/** Open a library by path prefix and validate its two files against each other. */
export function readLibrary(prefix: string): Library {
  const metaPath = `${prefix}.meta.jsonl`;
  const blobPath = `${prefix}.noise.bin`;
  let text: string;
  try {
    text = readFileSync(metaPath, "utf8");
  } catch (err) {
    throw new AdapterError(`cannot read library metadata ${metaPath}: ${(err as Error).message}`);
  }
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new AdapterError(`${metaPath}: empty metadata file`);
  }
  const header = parseHeader(lines[0], metaPath);
  const records: Array<Record<string, unknown>> = [];
  for (let i = 1; i < lines.length; i++) {
    try {
      records.push(JSON.parse(lines[i]));
    } catch (err) {
      throw new AdapterError(`${metaPath}: malformed record on line ${i + 1}`);
    }
  }
  if (records.length !== header.count) {
    throw new AdapterError(
      `${metaPath}: header count ${header.count} does not match ${records.length} records`);
  }
  const tensorLen = header.noiseShape.reduce((a, b) => a * b, 1);
  const expectedBytes = header.count * tensorLen * 4;
  let actualBytes: number;
  try {
    actualBytes = statSync(blobPath).size;
  } catch (err) {
    throw new AdapterError(`cannot read noise blob ${blobPath}: ${(err as Error).message}`);
  }
  if (actualBytes !== expectedBytes) {
    throw new AdapterError(
      `${blobPath}: expected ${expectedBytes} bytes for ${header.count} tensors, found ${actualBytes}`);
  }

  function noiseTensor(id: number): Float32Array {
    if (!Number.isInteger(id) || id < 0 || id >= header.count) {
      throw new AdapterError(`noise_id ${id} out of range for library of ${header.count}`);
    }
    const bytes = Buffer.alloc(tensorLen * 4);
    const fd = openSync(blobPath, "r");
    try {
      const got = readSync(fd, bytes, 0, bytes.length, id * tensorLen * 4);
      if (got !== bytes.length) {
        throw new AdapterError(`${blobPath}: short read for noise_id ${id}`);
      }
    } finally {
      closeSync(fd);
    }
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    const values = new Float32Array(tensorLen);
    for (let i = 0; i < tensorLen; i++) {
      values[i] = view.getFloat32(i * 4, true);
    }
    return values;
  }

  return { header, records, noiseTensor };
}
