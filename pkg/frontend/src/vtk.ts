/**
 * Legacy ASCII VTK reader for the unstructured grids the solver exports:
 * triangle meshes with point data and coarse quad grids with cell data.
 */

import { readFileSync } from "node:fs";

import { UnreadableFile } from "./errors.js";

export interface DataArray {
  name: string;
  /** 1 for SCALARS, 3 for VECTORS (z is written as zero). */
  components: number;
  /** Length numTuples * components, tuple-major. */
  values: Float64Array;
}

export interface VtkGrid {
  title: string;
  numPoints: number;
  /** x y z per point, length 3 * numPoints. */
  points: Float64Array;
  /** Connectivity per cell (without the leading count). */
  cells: Int32Array[];
  /** VTK cell type ids, 5 = triangle, 9 = quad. */
  cellTypes: Int32Array;
  pointData: DataArray[];
  cellData: DataArray[];
}

class TokenStream {
  private tokens: string[];
  private pos = 0;

  constructor(text: string) {
    this.tokens = text.split(/\s+/).filter((t) => t.length > 0);
  }

  next(): string {
    const t = this.tokens[this.pos++];
    if (t === undefined) throw new UnreadableFile("unexpected end of file");
    return t;
  }

  peek(): string | undefined {
    return this.tokens[this.pos];
  }

  nextInt(what: string): number {
    const t = this.next();
    const v = Number(t);
    if (!Number.isInteger(v)) throw new UnreadableFile(`expected integer ${what}, got '${t}'`);
    return v;
  }

  nextFloats(n: number, what: string): Float64Array {
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      const t = this.next();
      const v = Number(t);
      if (Number.isNaN(v) && t !== "nan" && t !== "NaN") {
        throw new UnreadableFile(`expected number in ${what}, got '${t}'`);
      }
      out[i] = v;
    }
    return out;
  }

  done(): boolean {
    return this.pos >= this.tokens.length;
  }
}

/** Parse a legacy ASCII VTK unstructured grid. */
export function parseVtk(text: string): VtkGrid {
  const lines = text.split(/\r?\n/);
  if (lines.length < 5 || !lines[0]!.startsWith("# vtk DataFile Version")) {
    throw new UnreadableFile("not a legacy VTK file");
  }
  const title = lines[1]!;
  if (lines[2]!.trim() !== "ASCII") {
    throw new UnreadableFile(`expected ASCII format, got '${lines[2]}'`);
  }
  if (lines[3]!.trim() !== "DATASET UNSTRUCTURED_GRID") {
    throw new UnreadableFile(`expected UNSTRUCTURED_GRID, got '${lines[3]}'`);
  }

  const ts = new TokenStream(lines.slice(4).join("\n"));
  let numPoints = 0;
  let points: Float64Array = new Float64Array(0);
  let cells: Int32Array[] = [];
  let cellTypes = new Int32Array(0);
  const pointData: DataArray[] = [];
  const cellData: DataArray[] = [];
  let section: "point" | "cell" | null = null;
  let sectionTuples = 0;

  while (!ts.done()) {
    const keyword = ts.next();
    switch (keyword) {
      case "POINTS": {
        numPoints = ts.nextInt("point count");
        ts.next(); // value type
        points = ts.nextFloats(numPoints * 3, "POINTS");
        break;
      }
      case "CELLS": {
        const numCells = ts.nextInt("cell count");
        ts.nextInt("cell list size");
        cells = [];
        for (let c = 0; c < numCells; c++) {
          const n = ts.nextInt("cell size");
          const conn = new Int32Array(n);
          for (let k = 0; k < n; k++) conn[k] = ts.nextInt("cell vertex");
          cells.push(conn);
        }
        break;
      }
      case "CELL_TYPES": {
        const n = ts.nextInt("cell type count");
        cellTypes = new Int32Array(n);
        for (let k = 0; k < n; k++) cellTypes[k] = ts.nextInt("cell type");
        break;
      }
      case "POINT_DATA": {
        section = "point";
        sectionTuples = ts.nextInt("point data count");
        break;
      }
      case "CELL_DATA": {
        section = "cell";
        sectionTuples = ts.nextInt("cell data count");
        break;
      }
      case "SCALARS":
      case "VECTORS": {
        if (section === null) {
          throw new UnreadableFile(`${keyword} before POINT_DATA/CELL_DATA`);
        }
        const target = section === "point" ? pointData : cellData;
        target.push(readAttributeWithKind(ts, keyword, sectionTuples));
        break;
      }
      default:
        throw new UnreadableFile(`unsupported keyword '${keyword}'`);
    }
  }
  if (numPoints === 0 || points.length !== 3 * numPoints) {
    throw new UnreadableFile("missing POINTS section");
  }
  if (cells.length !== cellTypes.length) {
    throw new UnreadableFile(
      `CELLS count ${cells.length} does not match CELL_TYPES count ${cellTypes.length}`,
    );
  }
  return { title, numPoints, points, cells, cellTypes, pointData, cellData };
}

function readAttributeWithKind(ts: TokenStream, kind: string, numTuples: number): DataArray {
  if (kind === "SCALARS") {
    const name = ts.next();
    ts.next(); // value type
    let components = 1;
    const peeked = ts.peek();
    if (peeked !== undefined && /^[1-4]$/.test(peeked)) {
      components = ts.nextInt("numComp");
    }
    if (ts.peek() === "LOOKUP_TABLE") {
      ts.next();
      ts.next();
    }
    return { name, components, values: ts.nextFloats(numTuples * components, name) };
  }
  const name = ts.next();
  ts.next();
  return { name, components: 3, values: ts.nextFloats(numTuples * 3, name) };
}

/** Read and parse a VTK file; any failure raises UnreadableFile. */
export function readVtk(path: string): VtkGrid {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new UnreadableFile(`${path}: ${(err as Error).message}`);
  }
  try {
    return parseVtk(text);
  } catch (err) {
    if (err instanceof UnreadableFile) {
      throw new UnreadableFile(`${path}: ${err.message}`);
    }
    throw err;
  }
}

/** Connectivity of all triangle cells, flattened (3 vertex ids per cell). */
export function triangles(grid: VtkGrid): Int32Array {
  const out: number[] = [];
  for (let c = 0; c < grid.cells.length; c++) {
    if (grid.cellTypes[c] === 5) out.push(...grid.cells[c]!);
  }
  return Int32Array.from(out);
}

/** Connectivity of all quad cells with their original cell index. */
export function quads(grid: VtkGrid): { conn: Int32Array; cellIndex: number }[] {
  const out: { conn: Int32Array; cellIndex: number }[] = [];
  for (let c = 0; c < grid.cells.length; c++) {
    if (grid.cellTypes[c] === 9) out.push({ conn: grid.cells[c]!, cellIndex: c });
  }
  return out;
}

export function dataByName(arrays: DataArray[], name: string): DataArray | undefined {
  return arrays.find((a) => a.name === name);
}

/**
 * Per-tuple display values: the scalar itself, or the euclidean norm for
 * vector data.
 */
export function displayValues(array: DataArray): Float64Array {
  if (array.components === 1) return array.values;
  const n = array.values.length / array.components;
  const out = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    let acc = 0;
    for (let k = 0; k < array.components; k++) {
      const v = array.values[i * array.components + k]!;
      acc += v * v;
    }
    out[i] = Math.sqrt(acc);
  }
  return out;
}
