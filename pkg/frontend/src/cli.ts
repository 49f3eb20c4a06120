#!/usr/bin/env node
/**
 * annealscan-figs: render SVG figures from an annealscan run directory.
 *
 *   annealscan-figs --run out/sk-n8 [--out out/sk-n8/figs]
 *                   [--families energy-bands-sorted,spin-dynamics]
 *                   [--state 1] [--s 0.8] [--log] [--title "SK n=8"]
 *
 * With no --families the tool renders every family whose input CSVs the
 * run contains.  Exit code 2 means bad arguments or unusable input data.
 */

import { parseArgs } from "node:util";
import { join } from "node:path";

import {
  FAMILIES,
  FigureDataError,
  FigureOptions,
  renderRun,
} from "./figures.js";

const USAGE = `usage: annealscan-figs --run DIR [options]

options:
  --run DIR        run directory holding the CSV tables (required)
  --out DIR        output directory (default: DIR/figs)
  --families LIST  comma-separated families (default: all available)
                   ${FAMILIES.join(", ")}
  --state N        eigenstate for the spin families (default 0)
  --s VALUE        grid point for the correlation matrix (default last)
  --log            log-scale y for characteristic-dynamics
  --title TEXT     title drawn above each figure
  --help           show this message
`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        run: { type: "string" },
        out: { type: "string" },
        families: { type: "string" },
        state: { type: "string" },
        s: { type: "string" },
        log: { type: "boolean" },
        title: { type: "string" },
        help: { type: "boolean" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  const values = parsed.values;
  if (values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  if (!values.run) {
    process.stderr.write(`--run is required\n${USAGE}`);
    return 2;
  }

  const options: FigureOptions = {};
  if (values.state !== undefined) {
    const state = Number(values.state);
    if (!Number.isInteger(state) || state < 0) {
      process.stderr.write(`--state must be a non-negative integer\n`);
      return 2;
    }
    options.state = state;
  }
  if (values.s !== undefined) {
    const sValue = Number(values.s);
    if (!Number.isFinite(sValue)) {
      process.stderr.write(`--s must be a number\n`);
      return 2;
    }
    options.sValue = sValue;
  }
  if (values.log) {
    options.log = true;
  }
  if (values.title !== undefined) {
    options.title = values.title;
  }

  const families =
    values.families === undefined
      ? ("auto" as const)
      : values.families.split(",").map((f) => f.trim()).filter(Boolean);
  const outDir = values.out ?? join(values.run, "figs");

  try {
    const written = renderRun(values.run, outDir, families, options);
    for (const path of written) {
      process.stdout.write(`${path}\n`);
    }
    if (written.length === 0) {
      process.stderr.write(
        `no figures written: ${values.run} has no usable input CSVs\n`,
      );
    }
    return 0;
  } catch (err) {
    if (err instanceof FigureDataError) {
      process.stderr.write(`${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

// Invoked as a script (bin entry) rather than imported by a test.
if (process.argv[1] && /cli\.js$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
