/**
 * Export pipelines: noise library -> posterior images -> ingestion records.
 *
 * `exportPosteriors` renders one image per stored noise tensor and writes
 * <id>.png into the records directory.  `exportEmbeddings` reads those
 * images back, embeds each, and writes <id>.f32le plus a JSON sidecar
 * {"noise_id": id, "semantic": "@<id>.f32le"} — exactly the directory
 * layout the `noiselib ingest` subcommand consumes.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { HttpEmbedder, HttpModel, toF32le } from "./http.js";
import { readLibrary } from "./library.js";
import { decodePng, encodePng } from "./png.js";
import { StubEmbedder, StubModel } from "./stub.js";
import {
  AdapterError,
  ConfigError,
  type AdapterConfig,
  type Embedder,
  type PosteriorModel,
} from "./types.js";

function isHttpId(id: string): boolean {
  return id.startsWith("http://") || id.startsWith("https://");
}

/** Instantiate the generation backend named by the config. */
export function createModel(cfg: AdapterConfig): PosteriorModel {
  if (cfg.model === "stub" || cfg.model.startsWith("stub:")) {
    return new StubModel({ steps: cfg.steps, latentShape: cfg.latentShape });
  }
  if (isHttpId(cfg.model)) {
    return new HttpModel(cfg.model, {
      sampler: cfg.sampler,
      steps: cfg.steps,
      latentShape: cfg.latentShape,
      timeoutMs: cfg.endpointTimeoutMs,
    });
  }
  throw new ConfigError(
    `unknown model id "${cfg.model}" (expected "stub", "stub:<variant>", or an http(s) URL)`);
}

/** Instantiate the embedding backend named by the config. */
export function createEmbedder(cfg: AdapterConfig, dim: number): Embedder {
  const id = cfg.embeddingModel;
  if (id === "stub" || id.startsWith("stub:")) {
    return new StubEmbedder(id, dim);
  }
  if (isHttpId(id)) {
    return new HttpEmbedder(id, dim, cfg.endpointTimeoutMs);
  }
  throw new ConfigError(
    `unknown embedding model id "${id}" (expected "stub", "stub:<variant>", or an http(s) URL)`);
}

async function forEachBatch(count: number, batchSize: number,
                            task: (id: number) => Promise<void>): Promise<void> {
  for (let start = 0; start < count; start += batchSize) {
    const ids = [];
    for (let id = start; id < Math.min(start + batchSize, count); id++) {
      ids.push(id);
    }
    await Promise.all(ids.map(task));
  }
}

/**
 * Render one posterior image per noise id into the records directory.
 *
 * The library's stored shape is checked against the model's expected
 * latent shape before any generation starts.  Returns the written paths
 * in id order.
 */
export async function exportPosteriors(
    cfg: AdapterConfig, model?: PosteriorModel): Promise<string[]> {
  const lib = readLibrary(cfg.library);
  const backend = model ?? createModel(cfg);
  const shape = lib.header.noiseShape;
  if (backend.latentShape !== null &&
      !(backend.latentShape.length === shape.length &&
        backend.latentShape.every((v, i) => v === shape[i]))) {
    throw new AdapterError(
      `latent shape mismatch: model expects [${backend.latentShape}], ` +
      `library stores [${shape}]`);
  }
  mkdirSync(cfg.recordsDir, { recursive: true });
  const paths = new Array<string>(lib.header.count);
  await forEachBatch(lib.header.count, cfg.batchSize, async (id) => {
    const image = await backend.generate(lib.noiseTensor(id), shape);
    const path = join(cfg.recordsDir, `${id}.png`);
    writeFileSync(path, encodePng(image));
    paths[id] = path;
  });
  return paths;
}

/**
 * Embed every posterior image and write ingestion records.
 *
 * Requires the library header to declare a semantic slot; the embedding
 * dimension must match it.  Each embedding is validated to be finite and
 * nonzero before it is written.  Returns the sidecar paths in id order.
 */
export async function exportEmbeddings(
    cfg: AdapterConfig, embedder?: Embedder): Promise<string[]> {
  const lib = readLibrary(cfg.library);
  const dim = lib.header.semanticDim;
  if (dim === null) {
    throw new AdapterError(
      "library declares no semantic slot (semantic_dim is null); " +
      "rebuild it with a feature config that sets semantic_dim");
  }
  const backend = embedder ?? createEmbedder(cfg, dim);
  if (backend.dim !== dim) {
    throw new AdapterError(
      `embedding dimension mismatch: embedder emits ${backend.dim}, ` +
      `library header declares ${dim}`);
  }
  mkdirSync(cfg.recordsDir, { recursive: true });
  const paths = new Array<string>(lib.header.count);
  await forEachBatch(lib.header.count, cfg.batchSize, async (id) => {
    const imagePath = join(cfg.recordsDir, `${id}.png`);
    if (!existsSync(imagePath)) {
      throw new AdapterError(
        `posterior image missing for noise_id ${id}: ${imagePath}`);
    }
    const embedding = await backend.embed(decodePng(readFileSync(imagePath)));
    let sumSq = 0;
    for (const value of embedding) {
      if (!Number.isFinite(value)) {
        throw new AdapterError(`embedding for noise_id ${id} contains non-finite values`);
      }
      sumSq += value * value;
    }
    if (sumSq === 0) {
      throw new AdapterError(`embedding for noise_id ${id} is the zero vector`);
    }
    writeFileSync(join(cfg.recordsDir, `${id}.f32le`), toF32le(embedding));
    const sidecar = join(cfg.recordsDir, `${id}.json`);
    writeFileSync(sidecar,
                  JSON.stringify({ noise_id: id, semantic: `@${id}.f32le` }) + "\n");
    paths[id] = sidecar;
  });
  return paths;
}
