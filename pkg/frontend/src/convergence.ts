/**
 * Convergence figures: relative error (log scale) against oversampling
 * width, one curve per basis type / snapshot / component, with published
 * reference values overlaid as hollow markers.
 */

import type { Figure } from "./csv.js";
import { SchemaMismatch } from "./errors.js";
import { Canvas, type Rgb } from "./raster.js";

const PALETTE: Rgb[] = [
  [31, 119, 180],
  [214, 39, 40],
  [44, 160, 44],
  [148, 103, 189],
  [255, 127, 14],
  [140, 86, 75],
  [227, 119, 194],
  [23, 190, 207],
  [188, 189, 34],
  [127, 127, 127],
];

const BLACK: Rgb = [0, 0, 0];
const GRID_COLOR: Rgb = [225, 225, 225];
const AXIS_COLOR: Rgb = [60, 60, 60];

export interface RenderOptions {
  /** Output resolution; 100 gives 640x420 pixels. */
  dpi?: number;
}

function decadeLabel(exp: number): string {
  return exp >= 0 ? String(10 ** exp) : (10 ** exp).toFixed(-exp);
}

/** Render one figure as a PNG. */
export function renderConvergence(fig: Figure, opts: RenderOptions = {}): Buffer {
  const scale = (opts.dpi ?? 100) / 100;
  if (!(scale > 0)) throw new RangeError(`invalid dpi ${opts.dpi}`);
  const width = Math.round(640 * scale);
  const height = Math.round(420 * scale);
  const fs = Math.max(1, Math.round(scale));

  const ys: number[] = [];
  const xs = new Set<number>();
  for (const curve of fig.curves) {
    for (const p of curve.points) {
      xs.add(p.s);
      if (p.errorPct > 0) ys.push(p.errorPct);
    }
    for (const p of curve.refPoints) {
      xs.add(p.s);
      if (p.errorPct > 0) ys.push(p.errorPct);
    }
  }
  if (ys.length === 0) {
    throw new SchemaMismatch(`figure ${fig.name}: no positive error values to plot`);
  }

  const loExp = Math.floor(Math.log10(Math.min(...ys)));
  let hiExp = Math.ceil(Math.log10(Math.max(...ys)));
  if (hiExp <= loExp) hiExp = loExp + 1;
  const sValues = [...xs].sort((a, b) => a - b);
  let xlo = sValues[0]!;
  let xhi = sValues[sValues.length - 1]!;
  if (xlo === xhi) {
    xlo -= 1;
    xhi += 1;
  }
  const xpad = 0.35 * ((xhi - xlo) / Math.max(1, sValues.length - 1));
  xlo -= xpad;
  xhi += xpad;

  const left = 64 * scale;
  const top = 30 * scale;
  const right = width - 18 * scale;
  const bottom = height - 46 * scale;

  const xpix = (s: number): number => left + ((s - xlo) / (xhi - xlo)) * (right - left);
  const ypix = (v: number): number =>
    bottom - ((Math.log10(v) - loExp) / (hiExp - loExp)) * (bottom - top);

  const canvas = new Canvas(width, height);

  for (let e = loExp; e <= hiExp; e++) {
    const y = ypix(10 ** e);
    canvas.drawLine(left, y, right, y, GRID_COLOR);
    canvas.drawTextRight(decadeLabel(e), left - 6 * scale, y - 3 * fs, AXIS_COLOR, fs);
  }
  for (const s of sValues) {
    const x = xpix(s);
    canvas.drawLine(x, top, x, bottom, GRID_COLOR);
    canvas.drawTextCenter(String(s), x, bottom + 8 * scale, AXIS_COLOR, fs);
  }
  canvas.drawLine(left, top, left, bottom, AXIS_COLOR);
  canvas.drawLine(left, bottom, right, bottom, AXIS_COLOR);
  canvas.drawTextCenter(`${fig.scenario} ${fig.grid}`, (left + right) / 2, 10 * scale, BLACK, fs);
  canvas.drawTextCenter("s", (left + right) / 2, height - 18 * scale, AXIS_COLOR, fs);
  canvas.drawText("error %", 6 * scale, 10 * scale, AXIS_COLOR, fs);

  const lineWidth = Math.max(1, Math.round(1.6 * scale));
  const markerR = 2.6 * scale;
  let hasRefs = false;
  fig.curves.forEach((curve, ci) => {
    const color = PALETTE[ci % PALETTE.length]!;
    const pts = curve.points.filter((p) => p.errorPct > 0);
    for (let i = 1; i < pts.length; i++) {
      canvas.drawLine(
        xpix(pts[i - 1]!.s), ypix(pts[i - 1]!.errorPct),
        xpix(pts[i]!.s), ypix(pts[i]!.errorPct),
        color, lineWidth,
      );
    }
    for (const p of pts) {
      canvas.fillCircle(xpix(p.s), ypix(p.errorPct), markerR, color);
    }
    for (const p of curve.refPoints) {
      if (p.errorPct <= 0) continue;
      hasRefs = true;
      const half = 3.2 * scale;
      canvas.strokeRect(xpix(p.s) - half, ypix(p.errorPct) - half, 2 * half, 2 * half, BLACK);
    }
  });

  const entries = fig.curves.map((c) => c.label);
  if (hasRefs) entries.push("ref");
  const rowH = 11 * fs;
  const swatch = 16 * scale;
  const textW = Math.max(...entries.map((t) => t.length)) * 6 * fs;
  const boxW = swatch + 8 * scale + textW + 10 * scale;
  const boxH = entries.length * rowH + 6 * scale;
  const boxX = right - boxW - 4 * scale;
  const boxY = top + 4 * scale;
  canvas.fillRect(boxX, boxY, boxW, boxH, [255, 255, 255]);
  canvas.strokeRect(boxX, boxY, boxW, boxH, AXIS_COLOR);
  entries.forEach((label, i) => {
    const cy = boxY + 3 * scale + i * rowH + rowH / 2;
    if (label === "ref" && i === entries.length - 1 && hasRefs) {
      const half = 3.2 * scale;
      canvas.strokeRect(boxX + 5 * scale + swatch / 2 - half, cy - half, 2 * half, 2 * half, BLACK);
    } else {
      const color = PALETTE[i % PALETTE.length]!;
      canvas.drawLine(boxX + 5 * scale, cy, boxX + 5 * scale + swatch, cy, color, lineWidth);
      canvas.fillCircle(boxX + 5 * scale + swatch / 2, cy, markerR, color);
    }
    canvas.drawText(label, boxX + swatch + 10 * scale, cy - 3 * fs, BLACK, fs);
  });

  return canvas.toPng();
}
