#!/usr/bin/env node
/**
 * Command-line entry point.
 *
 *   noiselib-adapter posteriors  --config adapter.json
 *   noiselib-adapter embeddings  --config adapter.json
 *   noiselib-adapter all         --config adapter.json
 *
 * Prints one JSON summary document on stdout.  Exit codes: 0 success,
 * 1 usage error, 2 runtime error (bad config, missing files, backend
 * failures).
 */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { exportEmbeddings, exportPosteriors } from "./export.js";
import { loadConfig } from "./types.js";

const USAGE =
  "usage: noiselib-adapter <posteriors|embeddings|all> --config FILE";

export async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: { config: { type: "string" } },
      allowPositionals: true,
    });
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 1;
  }
  const [command] = parsed.positionals;
  const commands = ["posteriors", "embeddings", "all"];
  if (parsed.positionals.length !== 1 || !commands.includes(command) ||
      !parsed.values.config) {
    console.error(USAGE);
    return 1;
  }
  try {
    const cfg = loadConfig(parsed.values.config);
    const summary: Record<string, unknown> = { records_dir: cfg.recordsDir };
    if (command === "posteriors" || command === "all") {
      summary["posteriors"] = (await exportPosteriors(cfg)).length;
    }
    if (command === "embeddings" || command === "all") {
      summary["embeddings"] = (await exportEmbeddings(cfg)).length;
    }
    console.log(JSON.stringify(summary));
    return 0;
  } catch (err) {
    console.error(`noiselib-adapter: error: ${(err as Error).message}`);
    return 2;
  }
}

const invokedDirectly = process.argv[1] &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
