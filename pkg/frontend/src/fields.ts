/**
 * Field triptychs: fine solution, coarse cell averages, downscaled
 * multiscale solution, side by side with one shared color scale.
 * Vector fields are shown as their euclidean magnitude.
 */

import { colormap, normalize, sharedScale, type Rgb } from "./colormap.js";
import { UnreadableFile } from "./errors.js";
import { Canvas } from "./raster.js";
import {
  dataByName,
  displayValues,
  quads,
  readVtk,
  triangles,
  type VtkGrid,
} from "./vtk.js";

export interface TriptychOptions {
  /** Output resolution; 100 gives roughly 740x250 pixels. */
  dpi?: number;
  /** Optional heading drawn above the panels. */
  title?: string;
}

interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Display values (scalars or vector magnitudes) for a named data array. */
export function panelData(
  grid: VtkGrid,
  name: string,
  kind: "points" | "cells",
): Float64Array {
  const arrays = kind === "points" ? grid.pointData : grid.cellData;
  const arr = dataByName(arrays, name);
  if (!arr) {
    const have = arrays.map((a) => a.name).join(", ") || "none";
    throw new UnreadableFile(`missing ${kind} data '${name}' (have: ${have})`);
  }
  return displayValues(arr);
}

function bbox(grid: VtkGrid): { xmin: number; xmax: number; ymin: number; ymax: number } {
  let xmin = Infinity;
  let xmax = -Infinity;
  let ymin = Infinity;
  let ymax = -Infinity;
  for (let i = 0; i < grid.numPoints; i++) {
    const x = grid.points[3 * i]!;
    const y = grid.points[3 * i + 1]!;
    if (x < xmin) xmin = x;
    if (x > xmax) xmax = x;
    if (y < ymin) ymin = y;
    if (y > ymax) ymax = y;
  }
  if (!(xmin < xmax) || !(ymin < ymax)) {
    throw new UnreadableFile("degenerate grid bounding box");
  }
  return { xmin, xmax, ymin, ymax };
}

/**
 * Draw one field panel into a canvas rectangle.  Triangle grids are
 * interpolated per pixel from point values; quad grids are filled flat
 * from cell values.
 */
export function renderPanel(
  canvas: Canvas,
  rect: Rect,
  grid: VtkGrid,
  values: Float64Array,
  kind: "points" | "cells",
  shade: (v: number) => Rgb,
): void {
  const box = bbox(grid);
  const sx = rect.w / (box.xmax - box.xmin);
  const sy = rect.h / (box.ymax - box.ymin);
  const s = Math.min(sx, sy);
  const ox = rect.x + (rect.w - s * (box.xmax - box.xmin)) / 2;
  const oy = rect.y + (rect.h - s * (box.ymax - box.ymin)) / 2;
  const px = (x: number): number => ox + s * (x - box.xmin);
  const py = (y: number): number => oy + s * (box.ymax - y);

  if (kind === "points") {
    const tri = triangles(grid);
    for (let t = 0; t < tri.length; t += 3) {
      const a = tri[t]!;
      const b = tri[t + 1]!;
      const c = tri[t + 2]!;
      canvas.fillTriangle(
        px(grid.points[3 * a]!), py(grid.points[3 * a + 1]!), values[a]!,
        px(grid.points[3 * b]!), py(grid.points[3 * b + 1]!), values[b]!,
        px(grid.points[3 * c]!), py(grid.points[3 * c + 1]!), values[c]!,
        shade,
      );
    }
  } else {
    for (const { conn, cellIndex } of quads(grid)) {
      const color = shade(values[cellIndex]!);
      const [a, b, c, d] = [conn[0]!, conn[1]!, conn[2]!, conn[3]!];
      const xs = [a, b, c, d].map((i) => px(grid.points[3 * i]!));
      const ys = [a, b, c, d].map((i) => py(grid.points[3 * i + 1]!));
      canvas.fillTriangleFlat(xs[0]!, ys[0]!, xs[1]!, ys[1]!, xs[2]!, ys[2]!, color);
      canvas.fillTriangleFlat(xs[0]!, ys[0]!, xs[2]!, ys[2]!, xs[3]!, ys[3]!, color);
    }
  }
}

const PANEL_LABELS = ["fine", "cell average", "multiscale"] as const;

/** Render the triptych for one exported configuration as a PNG. */
export function renderTriptych(
  fine: VtkGrid,
  blocks: VtkGrid,
  opts: TriptychOptions = {},
): Buffer {
  const scale = (opts.dpi ?? 100) / 100;
  if (!(scale > 0)) throw new RangeError(`invalid dpi ${opts.dpi}`);
  const fs = Math.max(1, Math.round(scale));

  const panels: { grid: VtkGrid; values: Float64Array; kind: "points" | "cells" }[] = [
    { grid: fine, values: panelData(fine, "u_fine", "points"), kind: "points" },
    { grid: blocks, values: panelData(blocks, "avg_coarse", "cells"), kind: "cells" },
    { grid: fine, values: panelData(fine, "u_ms", "points"), kind: "points" },
  ];
  const { min, max } = sharedScale(panels.map((p) => p.values));
  const shade = (v: number): Rgb => colormap(normalize(v, min, max));

  const P = Math.round(200 * scale);
  const gap = Math.round(12 * scale);
  const margin = Math.round(10 * scale);
  const titleH = opts.title ? Math.round(16 * scale) : 0;
  const labelH = Math.round(18 * scale);
  const barW = Math.round(14 * scale);
  const barGap = Math.round(6 * scale);
  const barLabelW = Math.round(64 * scale);
  const width = margin * 2 + P * 3 + gap * 2 + barGap + barW + barLabelW;
  const height = margin * 2 + titleH + P + labelH;

  const canvas = new Canvas(width, height);
  if (opts.title) {
    canvas.drawText(opts.title, margin, margin, [0, 0, 0], fs);
  }
  const top = margin + titleH;
  panels.forEach((panel, i) => {
    const rect: Rect = { x: margin + i * (P + gap), y: top, w: P, h: P };
    renderPanel(canvas, rect, panel.grid, panel.values, panel.kind, shade);
    canvas.strokeRect(rect.x, rect.y, rect.w, rect.h, [120, 120, 120]);
    canvas.drawTextCenter(PANEL_LABELS[i]!, rect.x + rect.w / 2, top + P + 6 * scale, [0, 0, 0], fs);
  });

  const barX = margin + 3 * P + 2 * gap + barGap;
  for (let row = 0; row < P; row++) {
    const t = 1 - row / (P - 1);
    const c = colormap(t);
    canvas.fillRect(barX, top + row, barW, 1, c);
  }
  canvas.strokeRect(barX, top, barW, P, [120, 120, 120]);
  canvas.drawText(formatTick(max), barX + barW + 4 * scale, top, [0, 0, 0], fs);
  canvas.drawText(formatTick(min), barX + barW + 4 * scale, top + P - 7 * fs, [0, 0, 0], fs);

  return canvas.toPng();
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return String(Number(v.toPrecision(4)));
  }
  return v.toExponential(2);
}

/** Read the two VTK files of one exported configuration and render them. */
export function renderTriptychFiles(
  finePath: string,
  blocksPath: string,
  opts: TriptychOptions = {},
): Buffer {
  return renderTriptych(readVtk(finePath), readVtk(blocksPath), opts);
}
