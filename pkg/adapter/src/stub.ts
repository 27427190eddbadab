/**
 * Deterministic stand-in backends for offline use and testing.
 *
 * The stub model renders a posterior image as a pure function of the stored
 * noise bytes: channel planes are squashed to [0, 1], lightly smoothed for
 * spatial coherence, and upsampled.  The stub embedder projects coarse
 * block statistics of an image through a fixed random matrix seeded from
 * the embedder id.  Neither is a neural network; they exist so the full
 * export-ingest pipeline can run without model weights while preserving
 * the properties the pipeline relies on: determinism, sensitivity to the
 * input noise, and embedding continuity in the image pixels.
 */

import {
  AdapterError,
  type Embedder,
  type PosteriorModel,
  type RgbImage,
} from "./types.js";

const UPSAMPLE = 4;
const BLOCK_GRID = 8;

function shapesEqual(a: readonly number[], b: readonly number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** One box-blur pass over a (h, w) plane with edge clamping. */
function boxBlur(plane: Float64Array, h: number, w: number): Float64Array {
  const out = new Float64Array(h * w);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let sum = 0;
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const yy = Math.min(h - 1, Math.max(0, y + dy));
          const xx = Math.min(w - 1, Math.max(0, x + dx));
          sum += plane[yy * w + xx];
        }
      }
      out[y * w + x] = sum / 9;
    }
  }
  return out;
}

export interface StubModelOptions {
  steps?: number;
  latentShape?: readonly number[] | null;
}

/**
 * Renders noise tensors into RGB images deterministically.
 *
 * The first three channel planes (cycled if the tensor has fewer) become
 * the red, green, and blue bands.  More sampler steps apply more smoothing
 * passes, mimicking how longer trajectories wash out high frequencies.
 */
export class StubModel implements PosteriorModel {
  readonly id = "stub";
  readonly latentShape: readonly number[] | null;
  private readonly passes: number;

  constructor(options: StubModelOptions = {}) {
    this.latentShape = options.latentShape ?? null;
    const steps = options.steps ?? 50;
    this.passes = Math.max(1, Math.min(4, Math.round(steps / 25)));
  }

  generate(noise: Float32Array, shape: readonly number[]): Promise<RgbImage> {
    if (shape.length !== 3) {
      throw new AdapterError(`stub model expects a (C, H, W) tensor, got shape [${shape}]`);
    }
    if (this.latentShape !== null && !shapesEqual(this.latentShape, shape)) {
      throw new AdapterError(
        `latent shape mismatch: model expects [${this.latentShape}], library stores [${shape}]`);
    }
    const [c, h, w] = shape;
    if (noise.length !== c * h * w) {
      throw new AdapterError(
        `noise tensor has ${noise.length} values, expected ${c * h * w} for shape [${shape}]`);
    }
    const bands: Float64Array[] = [];
    for (let band = 0; band < 3; band++) {
      const plane = noise.subarray((band % c) * h * w, ((band % c) + 1) * h * w);
      let values: Float64Array = new Float64Array(h * w);
      for (let i = 0; i < h * w; i++) {
        values[i] = 1 / (1 + Math.exp(-plane[i]));
      }
      for (let pass = 0; pass < this.passes; pass++) {
        values = boxBlur(values, h, w);
      }
      bands.push(values);
    }
    const width = w * UPSAMPLE;
    const height = h * UPSAMPLE;
    const pixels = new Uint8Array(width * height * 3);
    for (let y = 0; y < height; y++) {
      const sy = Math.floor(y / UPSAMPLE);
      for (let x = 0; x < width; x++) {
        const sx = Math.floor(x / UPSAMPLE);
        for (let band = 0; band < 3; band++) {
          pixels[(y * width + x) * 3 + band] =
            Math.round(255 * bands[band][sy * w + sx]);
        }
      }
    }
    return Promise.resolve({ width, height, pixels });
  }
}

function fnv1a64(text: string): bigint {
  let hash = 0xcbf29ce484222325n;
  for (let i = 0; i < text.length; i++) {
    hash ^= BigInt(text.charCodeAt(i) & 0xff);
    hash = (hash * 0x100000001b3n) & 0xffffffffffffffffn;
  }
  return hash;
}

/** splitmix64 stream of doubles in [0, 1), keyed by a string. */
function* seededUniforms(key: string): Generator<number> {
  let state = fnv1a64(key);
  while (true) {
    state = (state + 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn;
    let z = state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & 0xffffffffffffffffn;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & 0xffffffffffffffffn;
    z = z ^ (z >> 31n);
    yield Number(z >> 11n) / 2 ** 53;
  }
}

/**
 * Maps an image to a unit-norm embedding via a fixed random projection.
 *
 * Features are per-channel means over an 8x8 block grid (centered at 0.5)
 * plus a constant bias term, so the embedding is continuous in the pixels
 * and never the zero vector.  The projection matrix is derived from the
 * embedder id, so two embedders with the same id agree exactly.
 */
export class StubEmbedder implements Embedder {
  readonly id: string;
  readonly dim: number;
  private readonly projection: Float64Array;
  private readonly featureCount = BLOCK_GRID * BLOCK_GRID * 3 + 1;

  constructor(id: string, dim: number) {
    if (!Number.isInteger(dim) || dim <= 0) {
      throw new AdapterError(`embedding dimension must be a positive integer, got ${dim}`);
    }
    this.id = id;
    this.dim = dim;
    this.projection = new Float64Array(dim * this.featureCount);
    const uniforms = seededUniforms(`noiselib-adapter:${id}`);
    for (let i = 0; i < this.projection.length; i++) {
      this.projection[i] = 2 * uniforms.next().value - 1;
    }
  }

  embed(image: RgbImage): Promise<Float32Array> {
    const { width, height, pixels } = image;
    if (width <= 0 || height <= 0 || pixels.length !== width * height * 3) {
      throw new AdapterError("cannot embed: malformed RGB image buffer");
    }
    const features = new Float64Array(this.featureCount);
    for (let by = 0; by < BLOCK_GRID; by++) {
      const y0 = Math.floor((by * height) / BLOCK_GRID);
      const y1 = Math.max(y0 + 1, Math.floor(((by + 1) * height) / BLOCK_GRID));
      for (let bx = 0; bx < BLOCK_GRID; bx++) {
        const x0 = Math.floor((bx * width) / BLOCK_GRID);
        const x1 = Math.max(x0 + 1, Math.floor(((bx + 1) * width) / BLOCK_GRID));
        const sums = [0, 0, 0];
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) {
            const p = (y * width + x) * 3;
            sums[0] += pixels[p];
            sums[1] += pixels[p + 1];
            sums[2] += pixels[p + 2];
          }
        }
        const area = (y1 - y0) * (x1 - x0);
        const base = (by * BLOCK_GRID + bx) * 3;
        for (let band = 0; band < 3; band++) {
          features[base + band] = sums[band] / (255 * area) - 0.5;
        }
      }
    }
    features[this.featureCount - 1] = 1;
    const embedding = new Float64Array(this.dim);
    for (let k = 0; k < this.dim; k++) {
      let acc = 0;
      const row = k * this.featureCount;
      for (let j = 0; j < this.featureCount; j++) {
        acc += this.projection[row + j] * features[j];
      }
      embedding[k] = acc;
    }
    const norm = Math.sqrt(embedding.reduce((acc, v) => acc + v * v, 0));
    if (!(norm > 1e-12)) {
      throw new AdapterError("degenerate embedding: projection collapsed to zero");
    }
    const out = new Float32Array(this.dim);
    for (let k = 0; k < this.dim; k++) {
      out[k] = embedding[k] / norm;
    }
    return Promise.resolve(out);
  }
}
