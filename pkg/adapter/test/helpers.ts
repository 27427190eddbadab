/**
 * Test helpers: temp workspaces and driving the primary noiselib CLI.
 *
 * The adapter talks to the primary package only through its command line
 * and file formats, and so do these tests.
 */

import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function makeTempDir(label: string): string {
  return mkdtempSync(join(tmpdir(), `noiselib-adapter-${label}-`));
}

export interface PrimaryResult {
  status: number;
  stdout: string;
  stderr: string;
}

/** Run the primary CLI; never throws, returns exit status and streams. */
export function runPrimary(args: string[], cwd?: string): PrimaryResult {
  try {
    const stdout = execFileSync("python3", ["-m", "noiselib", ...args], {
      encoding: "utf8",
      cwd,
      stdio: ["ignore", "pipe", "pipe"],
    });
    return { status: 0, stdout, stderr: "" };
  } catch (err) {
    const failure = err as { status?: number; stdout?: string; stderr?: string };
    return {
      status: failure.status ?? -1,
      stdout: failure.stdout ?? "",
      stderr: failure.stderr ?? "",
    };
  }
}

/** Run the primary CLI expecting success; returns parsed stdout JSON. */
export function runPrimaryJson(args: string[], cwd?: string): unknown {
  const result = runPrimary([...args, "--quiet", "--json"], cwd);
  if (result.status !== 0) {
    throw new Error(
      `primary CLI failed (${result.status}): noiselib ${args.join(" ")}\n${result.stderr}`);
  }
  return JSON.parse(result.stdout);
}

export interface BuildOptions {
  seed?: number;
  count: number;
  shape?: string;
  semanticDim?: number;
}

/** Build a noise library in `dir` via the primary CLI; returns its prefix. */
export function buildLibrary(dir: string, options: BuildOptions): string {
  const prefix = join(dir, "lib");
  const args = [
    "build",
    "--seed", String(options.seed ?? 7),
    "--count", String(options.count),
    "--shape", options.shape ?? "4x8x8",
    "--out", prefix,
  ];
  if (options.semanticDim !== undefined) {
    const configPath = join(dir, "feature-config.json");
    writeFileSync(configPath, JSON.stringify({ semantic_dim: options.semanticDim }));
    args.push("--config", configPath);
  }
  runPrimaryJson(args);
  return prefix;
}

export function cosine(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) {
    throw new Error(`cosine: length mismatch ${a.length} vs ${b.length}`);
  }
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / Math.sqrt(na * nb);
}
