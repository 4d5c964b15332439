/**
 * The three figure families over harness metric CSVs:
 *   - evaluation-return curves per strategy, with stderr bands
 *   - advice schedule: reused-per-100 (top) and taken-per-100 (bottom)
 *   - model-of-teacher accuracy curves
 *
 * Inputs are never modified; outputs refuse to overwrite existing files
 * unless forced.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { MetricsRow, column, parseMetricsCsv, steps } from "./csv.js";
import {
  LabeledRows,
  STRATEGY_COLORS,
  orderKey,
  smooth,
  strategyFromFilename,
  toPoints,
} from "./series.js";
import { ChartSeries, PanelSpec, renderChart } from "./svg.js";
import { renderPng } from "./png.js";

export class OverwriteError extends Error {}

export interface PlotOptions {
  /** moving-average window; 1 = off */
  smoothWindow?: number;
  /** allow clobbering existing output files */
  force?: boolean;
  title?: string;
}

export interface PlotResult {
  svgPath: string;
  pngPath: string;
  labels: string[];
  warnings: string[];
}

export function loadCsvFiles(files: string[]): LabeledRows[] {
  if (files.length === 0) throw new Error("no CSV files given");
  const loaded = files.map((file) => ({
    label: strategyFromFilename(file),
    file,
    rows: parseMetricsCsv(fs.readFileSync(file, "utf-8")),
  }));
  loaded.sort((a, b) => orderKey(a.label) - orderKey(b.label)
    || a.label.localeCompare(b.label));
  return loaded;
}

function colorFor(label: string, index: number): string {
  return STRATEGY_COLORS[label] ?? ["#17becf", "#bcbd22", "#8c564b"][index % 3];
}

function writePair(base: string, panels: PanelSpec[], force: boolean,
                   labels: string[], warnings: string[]): PlotResult {
  const svgPath = `${base}.svg`;
  const pngPath = `${base}.png`;
  for (const p of [svgPath, pngPath]) {
    if (!force && fs.existsSync(p)) {
      throw new OverwriteError(`${p} exists; pass --force to overwrite`);
    }
  }
  fs.mkdirSync(path.dirname(svgPath), { recursive: true });
  fs.writeFileSync(svgPath, renderChart(panels));
  fs.writeFileSync(pngPath, renderPng(panels));
  return { svgPath, pngPath, labels, warnings };
}

function curveSeries(data: LabeledRows[], col: keyof MetricsRow,
                     opts: PlotOptions, shaded: boolean): {
  series: ChartSeries[];
  empty: string[];
} {
  const window = opts.smoothWindow ?? 1;
  const series: ChartSeries[] = [];
  const empty: string[] = [];
  data.forEach((entry, i) => {
    const ys = smooth(column(entry.rows, col as never), window);
    const bands = shaded
      ? column(entry.rows, "eval_return_stderr" as never)
      : undefined;
    const points = toPoints(steps(entry.rows), ys, bands);
    if (points.length === 0) empty.push(entry.label);
    series.push({
      label: entry.label,
      color: colorFor(entry.label, i),
      points,
      shaded,
    });
  });
  return { series, empty };
}

export function plotEval(files: string[], outBase: string,
                         opts: PlotOptions = {}): PlotResult {
  const data = loadCsvFiles(files);
  const { series } = curveSeries(data, "eval_return_mean", opts, true);
  const panel: PanelSpec = {
    title: opts.title ?? "Evaluation return",
    xLabel: "training step",
    yLabel: "discounted return",
    series,
  };
  return writePair(outBase, [panel], opts.force ?? false,
                   data.map((d) => d.label), []);
}

export function plotAdviceSchedule(files: string[], outBase: string,
                                   opts: PlotOptions = {}): PlotResult {
  const data = loadCsvFiles(files);
  const reused = curveSeries(data, "advice_reused_per_100", opts, false);
  const taken = curveSeries(data, "advice_taken_per_100", opts, false);
  const panels: PanelSpec[] = [
    {
      title: opts.title ?? "Advice reused per 100 steps",
      xLabel: "training step",
      yLabel: "reused / 100 steps",
      series: reused.series,
      yMin: 0,
      yMax: 100,
    },
    {
      title: "Advice taken per 100 steps",
      xLabel: "training step",
      yLabel: "taken / 100 steps",
      series: taken.series,
      yMin: 0,
      yMax: 100,
    },
  ];
  return writePair(outBase, panels, opts.force ?? false,
                   data.map((d) => d.label), []);
}

export function plotModelAccuracy(files: string[], outBase: string,
                                  opts: PlotOptions = {}): PlotResult {
  const data = loadCsvFiles(files);
  const { series, empty } = curveSeries(data, "model_accuracy", opts, false);
  const warnings = empty.map(
    (label) => `${label}: no model accuracy values; curve is empty`);
  const panel: PanelSpec = {
    title: opts.title ?? "Model-of-teacher accuracy",
    xLabel: "training step",
    yLabel: "fraction matching teacher",
    series,
    yMin: 0,
    yMax: 1,
  };
  return writePair(outBase, [panel], opts.force ?? false,
                   data.map((d) => d.label), warnings);
}
