#!/usr/bin/env node
/**
 * Figure generation from benchmark CSV reports.
 *
 * plot-tool velocity-bins --csv pairs.csv --out fig.svg [--metric translation|rotation] [--bin-width 1]
 * plot-tool noise-grid --csv gaussian=g/pairs.csv --csv gamma=... --csv student_t=... --out grid.svg [--bin-width 1]
 *
 * Inputs are never modified; output is written to --out only.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { renderNoiseGrid } from "./noiseGrid.js";
import { Metric, renderVelocityBins } from "./velocityBins.js";

function usage(): never {
  process.stderr.write(
    "usage: plot-tool velocity-bins --csv FILE --out FILE [--metric translation|rotation] [--bin-width W]\n" +
      "       plot-tool noise-grid --csv FAMILY=FILE ... --out FILE [--bin-width W]\n",
  );
  process.exit(2);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "velocity-bins" && command !== "noise-grid") usage();

  const { values } = parseArgs({
    args: rest,
    options: {
      csv: { type: "string", multiple: true },
      out: { type: "string" },
      metric: { type: "string", default: "translation" },
      "bin-width": { type: "string", default: "1" },
    },
  });
  const csvArgs = values.csv ?? [];
  const out = values.out;
  if (!out || csvArgs.length === 0) usage();
  const binWidth = Number(values["bin-width"]);
  if (!(binWidth > 0)) usage();

  try {
    let svg: string;
    if (command === "velocity-bins") {
      const metric = values.metric as Metric;
      if (metric !== "translation" && metric !== "rotation") usage();
      if (csvArgs.length !== 1) usage();
      svg = renderVelocityBins(readFileSync(csvArgs[0], "utf-8"), metric, binWidth);
    } else {
      const byFamily = new Map<string, string>();
      for (const arg of csvArgs) {
        const eq = arg.indexOf("=");
        if (eq <= 0) usage();
        byFamily.set(arg.slice(0, eq), readFileSync(arg.slice(eq + 1), "utf-8"));
      }
      svg = renderNoiseGrid(byFamily, binWidth);
    }
    writeFileSync(out, svg);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
