/**
 * Run discovery: read the manifests the solver writes next to its
 * outputs and pair up the field files that form one triptych.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { UnreadableFile } from "./errors.js";

export interface FieldEntry {
  path: string;
  kind: "triangles" | "blocks";
  grid: string;
  basis_type: number;
  layers: number;
  snapshot_step: number | null;
  names: string[];
}

export interface RunManifest {
  scenario: string;
  problem: string;
  csv: string;
  resolved_config: string;
  geometry: string;
  grids: { tag: string; layers: number[]; dof_f: number }[];
  basis_types: number[];
  snapshots: number[];
  fields: FieldEntry[];
}

export interface BundleManifest {
  runs: { scenario: string; dir: string }[];
  tables_csv: string;
}

function loadJson(path: string): unknown {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (err) {
    throw new UnreadableFile(`${path}: ${(err as Error).message}`);
  }
  try {
    return JSON.parse(text);
  } catch (err) {
    throw new UnreadableFile(`${path}: ${(err as Error).message}`);
  }
}

export function isBundle(doc: unknown): doc is BundleManifest {
  return typeof doc === "object" && doc !== null && Array.isArray((doc as BundleManifest).runs);
}

export function isRun(doc: unknown): doc is RunManifest {
  const m = doc as RunManifest;
  return (
    typeof doc === "object" &&
    doc !== null &&
    typeof m.scenario === "string" &&
    Array.isArray(m.fields)
  );
}

export function loadManifest(dir: string): RunManifest | BundleManifest {
  const doc = loadJson(join(dir, "manifest.json"));
  if (isBundle(doc) || isRun(doc)) return doc;
  throw new UnreadableFile(`${join(dir, "manifest.json")}: unrecognized manifest layout`);
}

/** All run directories under an input directory (itself, or bundle members). */
export function discoverRuns(dir: string): { dir: string; manifest: RunManifest }[] {
  const doc = loadManifest(dir);
  if (isRun(doc)) {
    return [{ dir, manifest: doc }];
  }
  const runs: { dir: string; manifest: RunManifest }[] = [];
  for (const entry of doc.runs) {
    const sub = join(dir, entry.dir);
    const m = loadManifest(sub);
    if (!isRun(m)) {
      throw new UnreadableFile(`${sub}: expected a run manifest`);
    }
    runs.push({ dir: sub, manifest: m });
  }
  return runs;
}

export interface TriptychJob {
  fine: string;
  blocks: string;
  /** Output file stem derived from the configuration. */
  stem: string;
}

/** Pair each triangle-field file with its block-average companion. */
export function triptychJobs(runDir: string, manifest: RunManifest): TriptychJob[] {
  const byConfig = new Map<string, { fine?: FieldEntry; blocks?: FieldEntry }>();
  const order: string[] = [];
  for (const entry of manifest.fields) {
    const key = [entry.grid, entry.basis_type, entry.layers, entry.snapshot_step].join("|");
    let slot = byConfig.get(key);
    if (!slot) {
      slot = {};
      byConfig.set(key, slot);
      order.push(key);
    }
    if (entry.kind === "triangles") slot.fine = entry;
    else slot.blocks = entry;
  }
  const jobs: TriptychJob[] = [];
  for (const key of order) {
    const slot = byConfig.get(key)!;
    if (!slot.fine || !slot.blocks) continue;
    const e = slot.fine;
    let stem = `${manifest.scenario}_${e.grid}_t${e.basis_type}_s${e.layers}`;
    if (e.snapshot_step !== null) stem += `_n${e.snapshot_step}`;
    jobs.push({
      fine: join(runDir, slot.fine.path),
      blocks: join(runDir, slot.blocks.path),
      stem,
    });
  }
  return jobs;
}
