/**
 * Raster twin of the SVG charts: same scales and geometry, drawn onto an
 * RGBA buffer and encoded as a PNG with node's zlib. Text is left to the
 * SVG; the raster carries frame, grid, bands, and curves.
 */

import * as zlib from "node:zlib";

import { ChartLayout, MARGIN, PanelSpec, dataExtent, linearScale, ticks } from "./svg.js";

type Rgb = [number, number, number];

function parseColor(hex: string): Rgb {
  const h = hex.replace("#", "");
  return [
    parseInt(h.slice(0, 2), 16),
    parseInt(h.slice(2, 4), 16),
    parseInt(h.slice(4, 6), 16),
  ];
}

class Raster {
  data: Buffer;

  constructor(readonly width: number, readonly height: number) {
    this.data = Buffer.alloc(width * height * 4, 255);
  }

  blend(x: number, y: number, [r, g, b]: Rgb, alpha: number): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    this.data[i] = Math.round(this.data[i] * (1 - alpha) + r * alpha);
    this.data[i + 1] = Math.round(this.data[i + 1] * (1 - alpha) + g * alpha);
    this.data[i + 2] = Math.round(this.data[i + 2] * (1 - alpha) + b * alpha);
    this.data[i + 3] = 255;
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Rgb,
       alpha = 1.0): void {
    const steps = Math.max(Math.abs(x1 - x0), Math.abs(y1 - y0), 1);
    for (let s = 0; s <= steps; s++) {
      const t = s / steps;
      this.blend(Math.round(x0 + (x1 - x0) * t),
                 Math.round(y0 + (y1 - y0) * t), color, alpha);
    }
  }

  vspan(x: number, yTop: number, yBottom: number, color: Rgb, alpha: number): void {
    for (let y = Math.round(yTop); y <= Math.round(yBottom); y++) {
      this.blend(Math.round(x), y, color, alpha);
    }
  }
}

const FRAME: Rgb = [51, 51, 51];
const GRID: Rgb = [221, 221, 221];

function drawPanel(raster: Raster, panel: PanelSpec, width: number,
                   height: number, yOffset: number): void {
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const extent = dataExtent(panel.series);
  const yLo = panel.yMin ?? extent.y[0];
  const yHi = panel.yMax ?? extent.y[1];
  const sx = linearScale(extent.x[0], extent.x[1], MARGIN.left, MARGIN.left + plotW);
  const sy = linearScale(yLo, yHi, yOffset + MARGIN.top + plotH, yOffset + MARGIN.top);

  for (const tv of ticks(yLo, yHi)) {
    raster.line(MARGIN.left, sy(tv), MARGIN.left + plotW, sy(tv), GRID);
  }
  // frame
  raster.line(MARGIN.left, yOffset + MARGIN.top, MARGIN.left + plotW, yOffset + MARGIN.top, FRAME);
  raster.line(MARGIN.left, yOffset + MARGIN.top + plotH, MARGIN.left + plotW, yOffset + MARGIN.top + plotH, FRAME);
  raster.line(MARGIN.left, yOffset + MARGIN.top, MARGIN.left, yOffset + MARGIN.top + plotH, FRAME);
  raster.line(MARGIN.left + plotW, yOffset + MARGIN.top, MARGIN.left + plotW, yOffset + MARGIN.top + plotH, FRAME);

  for (const s of panel.series) {
    if (s.points.length === 0) continue;
    const color = parseColor(s.color);
    if (s.shaded && s.points.some((p) => p.band !== undefined)) {
      for (let i = 0; i + 1 < s.points.length; i++) {
        const a = s.points[i];
        const b = s.points[i + 1];
        const xa = sx(a.x);
        const xb = sx(b.x);
        for (let x = Math.round(xa); x <= Math.round(xb); x++) {
          const t = xb === xa ? 0 : (x - xa) / (xb - xa);
          const mid = a.y + (b.y - a.y) * t;
          const half = (a.band ?? 0) + ((b.band ?? 0) - (a.band ?? 0)) * t;
          raster.vspan(x, sy(mid + half), sy(mid - half), color, 0.18);
        }
      }
    }
    for (let i = 0; i + 1 < s.points.length; i++) {
      raster.line(sx(s.points[i].x), sy(s.points[i].y),
                  sx(s.points[i + 1].x), sy(s.points[i + 1].y), color);
    }
    if (s.points.length === 1) {
      raster.blend(Math.round(sx(s.points[0].x)), Math.round(sy(s.points[0].y)), color, 1);
    }
  }
}

// ------------------------------------------------------------ PNG encoding

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const len = Buffer.alloc(4);
  len.writeUInt32BE(data.length);
  const body = Buffer.concat([Buffer.from(type, "ascii"), data]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body));
  return Buffer.concat([len, body, crc]);
}

export function encodePng(width: number, height: number, rgba: Buffer): Buffer {
  if (rgba.length !== width * height * 4) {
    throw new Error("rgba buffer does not match dimensions");
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 6;   // RGBA
  // compression, filter, interlace all 0
  const stride = width * 4;
  const raw = Buffer.alloc((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter: none
    rgba.copy(raw, y * (stride + 1) + 1, y * stride, (y + 1) * stride);
  }
  const idat = zlib.deflateSync(raw, { level: 9 });
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export function renderPng(panels: PanelSpec[], layout: ChartLayout = {}): Buffer {
  const width = layout.width ?? 720;
  const panelHeight = layout.panelHeight ?? 300;
  const raster = new Raster(width, panelHeight * panels.length);
  panels.forEach((p, i) => drawPanel(raster, p, width, panelHeight, i * panelHeight));
  return encodePng(raster.width, raster.height, raster.data);
}
