/**
 * Series assembly: strategy identification, ordering, smoothing, bands.
 */

import * as path from "node:path";

import { MetricsRow } from "./csv.js";

/** Fixed roster order and colors, shared by every figure. */
export const STRATEGY_ORDER = ["NA", "EA", "RA", "AIR", "SUA", "SUA-AIR"] as const;

export const STRATEGY_COLORS: Record<string, string> = {
  NA: "#7f7f7f",
  EA: "#1f77b4",
  RA: "#2ca02c",
  AIR: "#d62728",
  SUA: "#9467bd",
  "SUA-AIR": "#ff7f0e",
};

const PREFIXES: Array<[string, string]> = [
  ["sua_air", "SUA-AIR"],
  ["sua", "SUA"],
  ["air", "AIR"],
  ["na", "NA"],
  ["ea", "EA"],
  ["ra", "RA"],
];

/** Infer the strategy label from a metrics CSV filename. */
export function strategyFromFilename(file: string): string {
  const base = path.basename(file).toLowerCase();
  for (const [prefix, label] of PREFIXES) {
    if (base === prefix || base.startsWith(`${prefix}_`) || base.startsWith(`${prefix}.`)) {
      return label;
    }
  }
  return path.basename(file).replace(/\.csv$/i, "");
}

export function orderKey(label: string): number {
  const idx = (STRATEGY_ORDER as readonly string[]).indexOf(label);
  return idx === -1 ? STRATEGY_ORDER.length : idx;
}

export interface LabeledRows {
  label: string;
  file: string;
  rows: MetricsRow[];
}

export interface SeriesPoint {
  x: number;
  y: number;
  /** half-width of the shaded band, when the figure carries one */
  band?: number;
}

/**
 * Centered moving average with shrinking edges; window 1 is the identity.
 * Null gaps are preserved (a null never contributes to a neighbor's mean).
 */
export function smooth(
  values: (number | null)[],
  window: number,
): (number | null)[] {
  if (window <= 1) return values.slice();
  const half = Math.floor(window / 2);
  return values.map((v, i) => {
    if (v === null) return null;
    let sum = 0;
    let count = 0;
    for (let j = i - half; j <= i + half; j++) {
      const u = values[j];
      if (j >= 0 && j < values.length && u !== null) {
        sum += u;
        count += 1;
      }
    }
    return sum / count;
  });
}

/** Pair steps with values, dropping absent entries. */
export function toPoints(
  xs: number[],
  ys: (number | null)[],
  bands?: (number | null)[],
): SeriesPoint[] {
  const points: SeriesPoint[] = [];
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i];
    if (y === null) continue;
    const point: SeriesPoint = { x: xs[i], y };
    const band = bands?.[i];
    if (band !== undefined && band !== null) point.band = band;
    points.push(point);
  }
  return points;
}
