#!/usr/bin/env node
/**
 * plotkit <trace.csv | fields.csv> --out <figure.svg>
 *
 * The input's schema tag selects the figure: trace files become
 * convergence plots, fields files become profile overlays.  Exit codes:
 * 0 ok, 1 usage, 2 unreadable/unsupported input, 3 ordering violation.
 */

import { readFileSync } from "fs";

import { plotConvergence } from "./convergence.js";
import { OrderingError, plotProfiles } from "./profiles.js";
import { DataError, FIELDS_SCHEMA, SchemaError, TRACE_SCHEMA } from "./csv.js";

export function run(argv: string[]): number {
  const args = [...argv];
  let out = "figure.svg";
  const positional: string[] = [];
  while (args.length > 0) {
    const arg = args.shift() as string;
    if (arg === "--out") {
      const value = args.shift();
      if (!value) {
        console.error("--out needs a path");
        return 1;
      }
      out = value;
    } else if (arg.startsWith("--")) {
      console.error(`unknown flag ${arg}`);
      return 1;
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 1) {
    console.error("usage: plotkit <trace.csv|fields.csv> --out <figure.svg>");
    return 1;
  }
  const input = positional[0];

  let firstLine: string;
  try {
    firstLine = readFileSync(input, "utf-8").split(/\r?\n/, 1)[0] ?? "";
  } catch (err) {
    console.error(`cannot read ${input}: ${(err as Error).message}`);
    return 2;
  }
  const tag = firstLine.match(/^#\s*schema:\s*(\S+)/)?.[1];
  try {
    if (tag === TRACE_SCHEMA) {
      plotConvergence(input, out);
    } else if (tag === FIELDS_SCHEMA) {
      plotProfiles(input, out);
    } else {
      console.error(
        `${input}: unsupported schema '${tag ?? "(none)"}'; expected ` +
        `'${TRACE_SCHEMA}' or '${FIELDS_SCHEMA}'`);
      return 2;
    }
  } catch (err) {
    if (err instanceof OrderingError) {
      console.error(String(err.message));
      return 3;
    }
    if (err instanceof SchemaError || err instanceof DataError) {
      console.error(String(err.message));
      return 2;
    }
    throw err;
  }
  console.error(`wrote ${out}`);
  return 0;
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js")
  || process.argv[1]?.endsWith("plotkit");
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
