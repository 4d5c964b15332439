#!/usr/bin/env node
/**
 * suair-plot: render figures from experiment metric CSVs.
 *
 *   suair-plot eval     --csv 'runs/*_aggregate.csv' --out figures
 *   suair-plot advice   --csv 'runs/*_aggregate.csv' --out figures
 *   suair-plot accuracy --csv 'runs/*_aggregate.csv' --out figures [--force]
 */

import * as fs from "node:fs";
import * as path from "node:path";

import yargs from "yargs";
import type { Argv } from "yargs";
import { hideBin } from "yargs/helpers";

import { OverwriteError, plotAdviceSchedule, plotEval, plotModelAccuracy } from "./plots.js";

/** Expand `dir/pre*post.csv` style patterns; literal paths pass through. */
export function expandGlobs(patterns: string[]): string[] {
  const out: string[] = [];
  for (const pattern of patterns) {
    if (!pattern.includes("*")) {
      out.push(pattern);
      continue;
    }
    const dir = path.dirname(pattern);
    const base = path.basename(pattern);
    const rx = new RegExp(
      "^" + base.split("*").map((s) => s.replace(/[.+?^${}()|[\]\\]/g, "\\$&")).join(".*") + "$",
    );
    const entries = fs.existsSync(dir) ? fs.readdirSync(dir).sort() : [];
    for (const entry of entries) {
      if (rx.test(entry)) out.push(path.join(dir, entry));
    }
  }
  return out;
}

interface CommonArgs {
  csv: string[];
  out: string;
  smooth: number;
  force: boolean;
  name?: string;
}

function runPlot(kind: "eval" | "advice" | "accuracy", args: CommonArgs): number {
  const files = expandGlobs(args.csv);
  if (files.length === 0) {
    console.error(`no CSV files matched: ${args.csv.join(", ")}`);
    return 2;
  }
  const outBase = path.join(args.out, args.name ?? kind);
  const opts = { smoothWindow: args.smooth, force: args.force };
  try {
    const result =
      kind === "eval" ? plotEval(files, outBase, opts)
      : kind === "advice" ? plotAdviceSchedule(files, outBase, opts)
      : plotModelAccuracy(files, outBase, opts);
    for (const warning of result.warnings) console.error(`warning: ${warning}`);
    console.log(result.svgPath);
    console.log(result.pngPath);
    return 0;
  } catch (err) {
    if (err instanceof OverwriteError) {
      console.error(String(err.message));
      return 3;
    }
    console.error(err instanceof Error ? err.message : String(err));
    return 2;
  }
}

export function main(argv: string[]): number {
  let exitCode = 0;
  const common = (y: Argv) =>
    y.option("csv", { type: "string", array: true, demandOption: true,
                      describe: "metric CSV files or globs" })
     .option("out", { type: "string", demandOption: true,
                      describe: "output directory" })
     .option("smooth", { type: "number", default: 1,
                         describe: "moving-average window (1 = off)" })
     .option("force", { type: "boolean", default: false,
                        describe: "overwrite existing figures" })
     .option("name", { type: "string",
                       describe: "output basename (default: the command)" });

  yargs(argv)
    .scriptName("suair-plot")
    .command("eval", "evaluation-return curves", common,
             (a) => { exitCode = runPlot("eval", a as unknown as CommonArgs); })
    .command("advice", "advice taken/reused schedules", common,
             (a) => { exitCode = runPlot("advice", a as unknown as CommonArgs); })
    .command("accuracy", "model-of-teacher accuracy curves", common,
             (a) => { exitCode = runPlot("accuracy", a as unknown as CommonArgs); })
    .demandCommand(1)
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      console.error(msg ?? err?.message);
      exitCode = 2;
    })
    .parseSync();
  return exitCode;
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(path.basename(process.argv[1]));
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
