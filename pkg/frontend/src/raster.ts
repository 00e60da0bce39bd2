/** Software RGBA canvas: rectangles, lines, filled triangles, text. */

import { eachTextPixel, textWidth } from "./font.js";
import { encodePng } from "./png.js";

export type Rgb = readonly [number, number, number];

export class Canvas {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, background: Rgb = [255, 255, 255]) {
    if (width <= 0 || height <= 0) {
      throw new RangeError(`invalid canvas size ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(4 * width * height);
    for (let i = 0; i < width * height; i++) {
      this.data[4 * i] = background[0];
      this.data[4 * i + 1] = background[1];
      this.data[4 * i + 2] = background[2];
      this.data[4 * i + 3] = 255;
    }
  }

  set(x: number, y: number, c: Rgb): void {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = 4 * ((y | 0) * this.width + (x | 0));
    this.data[i] = c[0];
    this.data[i + 1] = c[1];
    this.data[i + 2] = c[2];
    this.data[i + 3] = 255;
  }

  get(x: number, y: number): Rgb {
    const i = 4 * (y * this.width + x);
    return [this.data[i]!, this.data[i + 1]!, this.data[i + 2]!];
  }

  fillRect(x0: number, y0: number, w: number, h: number, c: Rgb): void {
    const xa = Math.max(0, Math.floor(x0));
    const ya = Math.max(0, Math.floor(y0));
    const xb = Math.min(this.width, Math.ceil(x0 + w));
    const yb = Math.min(this.height, Math.ceil(y0 + h));
    for (let y = ya; y < yb; y++) {
      for (let x = xa; x < xb; x++) this.set(x, y, c);
    }
  }

  strokeRect(x0: number, y0: number, w: number, h: number, c: Rgb): void {
    this.drawLine(x0, y0, x0 + w, y0, c);
    this.drawLine(x0, y0 + h, x0 + w, y0 + h, c);
    this.drawLine(x0, y0, x0, y0 + h, c);
    this.drawLine(x0 + w, y0, x0 + w, y0 + h, c);
  }

  /** Bresenham line; `thickness` stamps a square at every step. */
  drawLine(x0: number, y0: number, x1: number, y1: number, c: Rgb, thickness = 1): void {
    let xa = Math.round(x0);
    let ya = Math.round(y0);
    const xb = Math.round(x1);
    const yb = Math.round(y1);
    const dx = Math.abs(xb - xa);
    const dy = -Math.abs(yb - ya);
    const sx = xa < xb ? 1 : -1;
    const sy = ya < yb ? 1 : -1;
    let err = dx + dy;
    const r = Math.floor(thickness / 2);
    for (;;) {
      if (thickness <= 1) {
        this.set(xa, ya, c);
      } else {
        for (let oy = -r; oy <= r; oy++) {
          for (let ox = -r; ox <= r; ox++) this.set(xa + ox, ya + oy, c);
        }
      }
      if (xa === xb && ya === yb) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        xa += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ya += sy;
      }
    }
  }

  fillCircle(cx: number, cy: number, radius: number, c: Rgb): void {
    const r2 = radius * radius;
    for (let y = Math.floor(cy - radius); y <= Math.ceil(cy + radius); y++) {
      for (let x = Math.floor(cx - radius); x <= Math.ceil(cx + radius); x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.set(x, y, c);
      }
    }
  }

  strokeCircle(cx: number, cy: number, radius: number, c: Rgb): void {
    const steps = Math.max(16, Math.ceil(4 * radius));
    for (let k = 0; k < steps; k++) {
      const t = (2 * Math.PI * k) / steps;
      this.set(Math.round(cx + radius * Math.cos(t)), Math.round(cy + radius * Math.sin(t)), c);
    }
  }

  /**
   * Filled triangle with a per-pixel value from barycentric interpolation
   * of the vertex values; `shade` turns the value into a color.
   */
  fillTriangle(
    x0: number, y0: number, v0: number,
    x1: number, y1: number, v1: number,
    x2: number, y2: number, v2: number,
    shade: (v: number) => Rgb,
  ): void {
    const area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (area === 0) return;
    const xa = Math.max(0, Math.floor(Math.min(x0, x1, x2)));
    const xb = Math.min(this.width - 1, Math.ceil(Math.max(x0, x1, x2)));
    const ya = Math.max(0, Math.floor(Math.min(y0, y1, y2)));
    const yb = Math.min(this.height - 1, Math.ceil(Math.max(y0, y1, y2)));
    for (let y = ya; y <= yb; y++) {
      for (let x = xa; x <= xb; x++) {
        const px = x + 0.5;
        const py = y + 0.5;
        const w0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / area;
        const w1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / area;
        const w2 = 1 - w0 - w1;
        if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9) continue;
        this.set(x, y, shade(w0 * v0 + w1 * v1 + w2 * v2));
      }
    }
  }

  fillTriangleFlat(
    x0: number, y0: number,
    x1: number, y1: number,
    x2: number, y2: number,
    c: Rgb,
  ): void {
    this.fillTriangle(x0, y0, 0, x1, y1, 0, x2, y2, 0, () => c);
  }

  drawText(text: string, x: number, y: number, c: Rgb, scale = 1): void {
    eachTextPixel(text, Math.round(x), Math.round(y), scale, (px, py) => this.set(px, py, c));
  }

  /** Right-aligned text ending at x. */
  drawTextRight(text: string, x: number, y: number, c: Rgb, scale = 1): void {
    this.drawText(text, x - textWidth(text, scale), y, c, scale);
  }

  /** Horizontally centered text around x. */
  drawTextCenter(text: string, x: number, y: number, c: Rgb, scale = 1): void {
    this.drawText(text, x - textWidth(text, scale) / 2, y, c, scale);
  }

  toPng(): Buffer {
    return encodePng(this.width, this.height, this.data);
  }
}
