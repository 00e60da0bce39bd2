/** Sequential colormap (viridis stops) for scalar fields. */

export type Rgb = readonly [number, number, number];

/** Viridis sampled every 20%, linearly interpolated in between. */
const ANCHORS: Rgb[] = [
  [68, 1, 84],
  [65, 68, 135],
  [42, 120, 142],
  [34, 168, 132],
  [122, 209, 81],
  [253, 231, 37],
];

export const NAN_COLOR: Rgb = [160, 160, 160];

/** Color for t in [0, 1]; clamps outside, gray for NaN. */
export function colormap(t: number): Rgb {
  if (Number.isNaN(t)) return NAN_COLOR;
  const x = Math.min(1, Math.max(0, t)) * (ANCHORS.length - 1);
  const i = Math.min(ANCHORS.length - 2, Math.floor(x));
  const f = x - i;
  const a = ANCHORS[i]!;
  const b = ANCHORS[i + 1]!;
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** Map a value into [0, 1] given scale bounds; constant fields map to 0.5. */
export function normalize(v: number, min: number, max: number): number {
  if (Number.isNaN(v)) return NaN;
  if (max <= min) return 0.5;
  return (v - min) / (max - min);
}

/** Min/max over several arrays, ignoring NaN. */
export function sharedScale(arrays: ArrayLike<number>[]): { min: number; max: number } {
  let min = Infinity;
  let max = -Infinity;
  for (const arr of arrays) {
    for (let i = 0; i < arr.length; i++) {
      const v = arr[i]!;
      if (Number.isNaN(v)) continue;
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (min > max) {
    return { min: 0, max: 1 };
  }
  return { min, max };
}
