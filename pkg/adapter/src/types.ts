/**
 * Shared types and configuration loading for the adapter.
 *
 * The adapter bridges a stored noise library to an image-generation model
 * and an embedding model, then writes records in the ingestion format the
 * `noiselib ingest` subcommand consumes.  Configuration lives in a JSON
 * file; relative paths inside it resolve against the file's directory.
 */

import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";

/** Raised for malformed or contradictory adapter configuration. */
export class ConfigError extends Error {}

/** Raised for runtime failures (missing inputs, backend errors, bad data). */
export class AdapterError extends Error {}

/** An 8-bit RGB image, row-major, 3 bytes per pixel. */
export interface RgbImage {
  width: number;
  height: number;
  /** Length is exactly width * height * 3. */
  pixels: Uint8Array;
}

/**
 * A generation backend: turns one stored noise tensor into a posterior
 * image.  Generation is always unconditional (no prompt) and must be
 * deterministic for fixed inputs and settings.
 */
export interface PosteriorModel {
  readonly id: string;
  /** Expected latent shape, or null to accept whatever the library stores. */
  readonly latentShape: readonly number[] | null;
  generate(noise: Float32Array, shape: readonly number[]): Promise<RgbImage>;
}

/** An embedding backend: turns a posterior image into a feature vector. */
export interface Embedder {
  readonly id: string;
  readonly dim: number;
  embed(image: RgbImage): Promise<Float32Array>;
}

/** Parsed adapter configuration with defaults applied and paths resolved. */
export interface AdapterConfig {
  /** Generation model id: "stub", "stub:<variant>", or an http(s) endpoint. */
  model: string;
  /** Sampler id recorded with generation requests. */
  sampler: string;
  /** Sampler step count. */
  steps: number;
  /** Posterior generation is prompt-free; the flag must be explicitly true. */
  unconditional: true;
  /** Library path prefix (reads <prefix>.meta.jsonl and <prefix>.noise.bin). */
  library: string;
  /** Output directory for <id>.png, <id>.f32le, and <id>.json records. */
  recordsDir: string;
  /** Embedding model id: "stub", "stub:<variant>", or an http(s) endpoint. */
  embeddingModel: string;
  /** How many ids are processed concurrently. */
  batchSize: number;
  /** Latent shape the model requires, or null to skip the check. */
  latentShape: number[] | null;
  /** Timeout for http backend requests. */
  endpointTimeoutMs: number;
}

function requireString(raw: Record<string, unknown>, key: string): string {
  const value = raw[key];
  if (typeof value !== "string" || value.length === 0) {
    throw new ConfigError(`config field "${key}" must be a non-empty string`);
  }
  return value;
}

function optionalString(raw: Record<string, unknown>, key: string, fallback: string): string {
  if (!(key in raw) || raw[key] === undefined) return fallback;
  return requireString(raw, key);
}

function optionalPositiveInt(raw: Record<string, unknown>, key: string, fallback: number): number {
  const value = raw[key];
  if (value === undefined) return fallback;
  if (typeof value !== "number" || !Number.isInteger(value) || value <= 0) {
    throw new ConfigError(`config field "${key}" must be a positive integer`);
  }
  return value;
}

function optionalShape(raw: Record<string, unknown>, key: string): number[] | null {
  const value = raw[key];
  if (value === undefined || value === null) return null;
  if (!Array.isArray(value) || value.length === 0 ||
      !value.every((v) => typeof v === "number" && Number.isInteger(v) && v > 0)) {
    throw new ConfigError(`config field "${key}" must be an array of positive integers`);
  }
  return value as number[];
}

/** Parse and validate an adapter config object (already JSON-decoded). */
export function parseConfig(raw: unknown, baseDir = "."): AdapterConfig {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ConfigError("config must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  if (obj["unconditional"] !== true) {
    throw new ConfigError(
      'config field "unconditional" must be true (posterior generation is prompt-free)');
  }
  return {
    model: requireString(obj, "model"),
    sampler: optionalString(obj, "sampler", "ddim"),
    steps: optionalPositiveInt(obj, "steps", 50),
    unconditional: true,
    library: resolve(baseDir, requireString(obj, "library")),
    recordsDir: resolve(baseDir, requireString(obj, "records_dir")),
    embeddingModel: optionalString(obj, "embedding_model", "stub"),
    batchSize: optionalPositiveInt(obj, "batch_size", 4),
    latentShape: optionalShape(obj, "latent_shape"),
    endpointTimeoutMs: optionalPositiveInt(obj, "endpoint_timeout_ms", 30_000),
  };
}

/** Load an adapter config from a JSON file. */
export function loadConfig(path: string): AdapterConfig {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new ConfigError(`cannot read config file ${path}: ${(err as Error).message}`);
  }
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (err) {
    throw new ConfigError(`${path}: malformed JSON: ${(err as Error).message}`);
  }
  return parseConfig(raw, dirname(resolve(path)));
}
