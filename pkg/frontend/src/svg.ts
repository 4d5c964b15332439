/**
 * Minimal deterministic SVG line charts.
 *
 * Every curve element carries its exact source data in a `data-series`
 * attribute (JSON of label, x and y arrays, band half-widths when shaded),
 * so a figure can be audited against the CSV it came from without pixel
 * work. No timestamps or environment-dependent content are emitted: equal
 * inputs give byte-equal files.
 */

import { SeriesPoint } from "./series.js";

export interface ChartSeries {
  label: string;
  color: string;
  points: SeriesPoint[];
  /** draw the ±band ribbon when the points carry band values */
  shaded?: boolean;
}

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: ChartSeries[];
  /** force the y range; otherwise derived from the data (plus bands) */
  yMin?: number;
  yMax?: number;
}

export interface ChartLayout {
  width?: number;
  panelHeight?: number;
}

export const MARGIN = { top: 34, right: 16, bottom: 42, left: 58 };

function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new Error(`non-finite coordinate ${v}`);
  return Number(v.toFixed(3)).toString();
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 10_000) return v.toExponential(1);
  if (a >= 100 || Number.isInteger(v)) return v.toString();
  return Number(v.toPrecision(3)).toString();
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Scale {
  (v: number): number;
}

export function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function ticks(lo: number, hi: number, n = 5): number[] {
  if (lo === hi) return [lo];
  const rawStep = (hi - lo) / n;
  const mag = 10 ** Math.floor(Math.log10(Math.abs(rawStep)));
  const norm = rawStep / mag;
  const step = (norm >= 5 ? 5 : norm >= 2 ? 2 : 1) * mag;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9; v += step) out.push(Number(v.toFixed(10)));
  return out;
}

export function dataExtent(series: ChartSeries[]): {
  x: [number, number];
  y: [number, number];
} {
  let xMin = Infinity, xMax = -Infinity, yMin = Infinity, yMax = -Infinity;
  for (const s of series) {
    for (const p of s.points) {
      xMin = Math.min(xMin, p.x);
      xMax = Math.max(xMax, p.x);
      const half = s.shaded && p.band !== undefined ? p.band : 0;
      yMin = Math.min(yMin, p.y - half);
      yMax = Math.max(yMax, p.y + half);
    }
  }
  if (!Number.isFinite(xMin)) {
    xMin = 0; xMax = 1; yMin = 0; yMax = 1;
  }
  if (yMin === yMax) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  return { x: [xMin, xMax], y: [yMin, yMax] };
}

function seriesPayload(s: ChartSeries): string {
  const payload: Record<string, unknown> = {
    label: s.label,
    x: s.points.map((p) => p.x),
    y: s.points.map((p) => p.y),
  };
  if (s.shaded && s.points.some((p) => p.band !== undefined)) {
    payload.band = s.points.map((p) => p.band ?? 0);
  }
  return escapeXml(JSON.stringify(payload));
}

function renderPanel(panel: PanelSpec, width: number, height: number,
                     yOffset: number): string {
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const extent = dataExtent(panel.series);
  const yLo = panel.yMin ?? extent.y[0];
  const yHi = panel.yMax ?? extent.y[1];
  const sx = linearScale(extent.x[0], extent.x[1], MARGIN.left, MARGIN.left + plotW);
  const sy = linearScale(yLo, yHi, yOffset + MARGIN.top + plotH, yOffset + MARGIN.top);

  const parts: string[] = [];
  parts.push(`<text x="${fmt(width / 2)}" y="${fmt(yOffset + 18)}" class="title" text-anchor="middle">${escapeXml(panel.title)}</text>`);

  for (const tv of ticks(yLo, yHi)) {
    const y = sy(tv);
    parts.push(`<line x1="${fmt(MARGIN.left)}" y1="${fmt(y)}" x2="${fmt(MARGIN.left + plotW)}" y2="${fmt(y)}" class="grid"/>`);
    parts.push(`<text x="${fmt(MARGIN.left - 6)}" y="${fmt(y + 3)}" class="tick" text-anchor="end">${fmtTick(tv)}</text>`);
  }
  for (const tv of ticks(extent.x[0], extent.x[1])) {
    const x = sx(tv);
    const yBase = yOffset + MARGIN.top + plotH;
    parts.push(`<line x1="${fmt(x)}" y1="${fmt(yBase)}" x2="${fmt(x)}" y2="${fmt(yBase + 4)}" class="axis"/>`);
    parts.push(`<text x="${fmt(x)}" y="${fmt(yBase + 16)}" class="tick" text-anchor="middle">${fmtTick(tv)}</text>`);
  }
  parts.push(`<rect x="${fmt(MARGIN.left)}" y="${fmt(yOffset + MARGIN.top)}" width="${fmt(plotW)}" height="${fmt(plotH)}" class="frame"/>`);
  parts.push(`<text x="${fmt(MARGIN.left + plotW / 2)}" y="${fmt(yOffset + MARGIN.top + plotH + 34)}" class="label" text-anchor="middle">${escapeXml(panel.xLabel)}</text>`);
  parts.push(`<text transform="translate(14 ${fmt(yOffset + MARGIN.top + plotH / 2)}) rotate(-90)" class="label" text-anchor="middle">${escapeXml(panel.yLabel)}</text>`);

  for (const s of panel.series) {
    if (s.points.length === 0) continue;
    if (s.shaded && s.points.some((p) => p.band !== undefined)) {
      const upper = s.points.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y + (p.band ?? 0)))}`);
      const lower = s.points.slice().reverse()
        .map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y - (p.band ?? 0)))}`);
      parts.push(`<polygon points="${[...upper, ...lower].join(" ")}" fill="${s.color}" opacity="0.18" stroke="none"/>`);
    }
    const pts = s.points.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`).join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.6" class="curve" data-series="${seriesPayload(s)}"/>`);
  }

  // legend along the top edge of the panel
  let lx = MARGIN.left;
  const ly = yOffset + MARGIN.top - 8;
  for (const s of panel.series) {
    parts.push(`<line x1="${fmt(lx)}" y1="${fmt(ly)}" x2="${fmt(lx + 16)}" y2="${fmt(ly)}" stroke="${s.color}" stroke-width="2"/>`);
    parts.push(`<text x="${fmt(lx + 20)}" y="${fmt(ly + 3)}" class="tick">${escapeXml(s.label)}</text>`);
    lx += 26 + 7 * s.label.length;
  }
  return parts.join("\n");
}

export function renderChart(panels: PanelSpec[], layout: ChartLayout = {}): string {
  const width = layout.width ?? 720;
  const panelHeight = layout.panelHeight ?? 300;
  const height = panelHeight * panels.length;
  const body = panels
    .map((p, i) => renderPanel(p, width, panelHeight, i * panelHeight))
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">
<style>
  text { font-family: Helvetica, Arial, sans-serif; }
  .title { font-size: 13px; font-weight: bold; }
  .label { font-size: 11px; }
  .tick { font-size: 10px; fill: #444; }
  .grid { stroke: #ddd; stroke-width: 0.5; }
  .frame { fill: none; stroke: #333; stroke-width: 1; }
  .axis { stroke: #333; stroke-width: 1; }
</style>
<rect width="100%" height="100%" fill="white"/>
${body}
</svg>
`;
}

export interface ExtractedSeries {
  label: string;
  x: number[];
  y: number[];
  band?: number[];
}

/** Recover the exact data series embedded in a chart file. */
export function extractSeries(svgText: string): ExtractedSeries[] {
  const out: ExtractedSeries[] = [];
  const re = /data-series="([^"]*)"/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(svgText)) !== null) {
    const json = m[1]
      .replace(/&quot;/g, '"')
      .replace(/&lt;/g, "<")
      .replace(/&gt;/g, ">")
      .replace(/&amp;/g, "&");
    out.push(JSON.parse(json) as ExtractedSeries);
  }
  return out;
}
