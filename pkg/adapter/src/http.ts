/**
 * HTTP backends for real generation and embedding services.
 *
 * These clients speak a small wire protocol so the adapter can drive an
 * actual diffusion model or embedding model hosted behind an endpoint:
 *
 *   POST <base>/generate   JSON {noise, shape, sampler, steps, unconditional}
 *                          where noise is base64 little-endian f32
 *                          -> 200 with PNG bytes
 *   POST <base>/embed      PNG bytes (content-type image/png)
 *                          -> 200 with little-endian f32 bytes
 *
 * Responses other than 200 surface as errors with the status and body text.
 */

import { decodePng, encodePng } from "./png.js";
import {
  AdapterError,
  type Embedder,
  type PosteriorModel,
  type RgbImage,
} from "./types.js";

/** Serialize float values as little-endian 32-bit bytes. */
export function toF32le(values: Float32Array): Buffer {
  const out = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    out.writeFloatLE(values[i], i * 4);
  }
  return out;
}

/** Parse little-endian 32-bit float bytes. */
export function fromF32le(bytes: Buffer | Uint8Array): Float32Array {
  const buf = Buffer.isBuffer(bytes) ? bytes : Buffer.from(bytes);
  if (buf.length % 4 !== 0) {
    throw new AdapterError(`f32le payload length ${buf.length} is not a multiple of 4`);
  }
  const values = new Float32Array(buf.length / 4);
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(i * 4);
  }
  return values;
}

async function post(url: string, body: string | Uint8Array, contentType: string,
                    timeoutMs: number): Promise<Buffer> {
  let response: Response;
  try {
    response = await fetch(url, {
      method: "POST",
      headers: { "content-type": contentType },
      body: typeof body === "string" ? body : new Uint8Array(body),
      signal: AbortSignal.timeout(timeoutMs),
    });
  } catch (err) {
    throw new AdapterError(`request to ${url} failed: ${(err as Error).message}`);
  }
  if (!response.ok) {
    const detail = (await response.text()).slice(0, 200);
    throw new AdapterError(`${url} returned ${response.status}: ${detail}`);
  }
  return Buffer.from(await response.arrayBuffer());
}

export interface HttpModelOptions {
  sampler?: string;
  steps?: number;
  latentShape?: readonly number[] | null;
  timeoutMs?: number;
}

/** Generation client for a remote model endpoint. */
export class HttpModel implements PosteriorModel {
  readonly id: string;
  readonly latentShape: readonly number[] | null;
  private readonly sampler: string;
  private readonly steps: number;
  private readonly timeoutMs: number;

  constructor(baseUrl: string, options: HttpModelOptions = {}) {
    this.id = baseUrl.replace(/\/+$/, "");
    this.latentShape = options.latentShape ?? null;
    this.sampler = options.sampler ?? "ddim";
    this.steps = options.steps ?? 50;
    this.timeoutMs = options.timeoutMs ?? 30_000;
  }

  async generate(noise: Float32Array, shape: readonly number[]): Promise<RgbImage> {
    const payload = JSON.stringify({
      noise: toF32le(noise).toString("base64"),
      shape,
      sampler: this.sampler,
      steps: this.steps,
      unconditional: true,
    });
    const body = await post(`${this.id}/generate`, payload, "application/json",
                            this.timeoutMs);
    return decodePng(body);
  }
}

/** Embedding client for a remote embedder endpoint. */
export class HttpEmbedder implements Embedder {
  readonly id: string;
  readonly dim: number;
  private readonly timeoutMs: number;

  constructor(baseUrl: string, dim: number, timeoutMs = 30_000) {
    this.id = baseUrl.replace(/\/+$/, "");
    this.dim = dim;
    this.timeoutMs = timeoutMs;
  }

  async embed(image: RgbImage): Promise<Float32Array> {
    const body = await post(`${this.id}/embed`, encodePng(image), "image/png",
                            this.timeoutMs);
    const values = fromF32le(body);
    if (values.length !== this.dim) {
      throw new AdapterError(
        `embedder returned ${values.length} values, expected ${this.dim}`);
    }
    return values;
  }
}
