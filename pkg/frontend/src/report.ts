/**
 * CLI: render every figure supported by the CSVs in a results directory.
 *
 *   node dist/report.js --results DIR --out DIR
 *
 * Figures, by input file:
 *   results.csv + rates.csv      -> rate_plot.svg
 *   spde.csv [density_analytic]  -> density_snapshot.svg
 *   kernel_samples.csv           -> kernel_plot.svg
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";
import { SchemaError } from "./csv.js";
import { densitySnapshot, kernelPlot, ratePlot } from "./figures.js";

function readIfPresent(dir: string, name: string): string | null {
  const p = path.join(dir, name);
  return fs.existsSync(p) ? fs.readFileSync(p, "utf-8") : null;
}

/** Render all applicable figures; returns the list of files written. */
export function renderAll(resultsDir: string, outDir: string): string[] {
  if (!fs.existsSync(resultsDir)) {
    throw new Error(`results directory not found: ${resultsDir}`);
  }
  fs.mkdirSync(outDir, { recursive: true });
  const written: string[] = [];

  const emit = (name: string, svg: string) => {
    const target = path.join(outDir, name);
    fs.writeFileSync(target, svg);
    written.push(target);
  };

  const results = readIfPresent(resultsDir, "results.csv");
  if (results !== null) {
    const rates = readIfPresent(resultsDir, "rates.csv");
    if (rates === null) {
      throw new SchemaError("results.csv present but rates.csv missing");
    }
    emit("rate_plot.svg", ratePlot(results, rates));
  }

  const spde = readIfPresent(resultsDir, "spde.csv");
  if (spde !== null) {
    emit("density_snapshot.svg", densitySnapshot(spde, readIfPresent(resultsDir, "density_analytic.csv")));
  }

  const samples = readIfPresent(resultsDir, "kernel_samples.csv");
  if (samples !== null) {
    emit("kernel_plot.svg", kernelPlot(samples));
  }

  if (written.length === 0) {
    throw new Error(`no renderable CSVs in ${resultsDir}`);
  }
  return written;
}

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      results: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.results || !values.out) {
    console.error("usage: report --results DIR --out DIR");
    return 2;
  }
  try {
    for (const file of renderAll(values.results, values.out)) {
      console.log(`wrote ${file}`);
    }
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 1;
  }
  return 0;
}

if (process.argv[1] && path.basename(process.argv[1]).startsWith("report")) {
  process.exit(main(process.argv.slice(2)));
}
