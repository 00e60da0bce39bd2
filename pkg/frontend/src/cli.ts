#!/usr/bin/env node
/**
 * Render convergence figures and field triptychs from solver run
 * directories (or bare error CSV files) into PNG images.
 */

import { mkdirSync, readdirSync, readFileSync, realpathSync, statSync, writeFileSync } from "node:fs";
import { isAbsolute, join, sep } from "node:path";
import { pathToFileURL } from "node:url";

import { renderConvergence } from "./convergence.js";
import { buildFigures, readErrorRows } from "./csv.js";
import { renderTriptychFiles } from "./fields.js";
import { discoverRuns, triptychJobs } from "./manifest.js";

const USAGE = `usage: nlmc-viz [options] <input ...>

inputs are solver run directories (containing manifest.json), reproduce
bundle directories, or error-table CSV files; '*' and '?' globs are
expanded against the filesystem.

options:
  --out DIR    output directory (default: viz-out)
  --dpi N      raster resolution, 100 = native size (default: 100)
  --kind K     convergence | fields | all (default: all)
  -h, --help   show this message
`;

interface Options {
  out: string;
  dpi: number;
  kind: "convergence" | "fields" | "all";
  inputs: string[];
}

export function parseArgs(argv: string[]): Options | "help" {
  const opts: Options = { out: "viz-out", dpi: 100, kind: "all", inputs: [] };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]!;
    const next = (): string => {
      const v = argv[++i];
      if (v === undefined) throw new Error(`${arg} needs a value`);
      return v;
    };
    if (arg === "-h" || arg === "--help") return "help";
    else if (arg === "--out") opts.out = next();
    else if (arg === "--dpi") {
      opts.dpi = Number(next());
      if (!(opts.dpi > 0)) throw new Error("--dpi must be a positive number");
    } else if (arg === "--kind") {
      const k = next();
      if (k !== "convergence" && k !== "fields" && k !== "all") {
        throw new Error(`--kind must be convergence, fields or all, got '${k}'`);
      }
      opts.kind = k;
    } else if (arg.startsWith("-")) {
      throw new Error(`unknown option '${arg}'`);
    } else {
      opts.inputs.push(arg);
    }
  }
  if (opts.inputs.length === 0) throw new Error("no inputs given");
  return opts;
}

/** Expand '*' / '?' path patterns (per segment, no '**'). */
export function expandGlob(pattern: string): string[] {
  if (!/[*?]/.test(pattern)) return [pattern];
  const abs = isAbsolute(pattern);
  const segments = pattern.split(sep).filter((s) => s.length > 0);
  let current: string[] = [abs ? sep : "."];
  for (const segment of segments) {
    if (!/[*?]/.test(segment)) {
      current = current.map((base) => join(base, segment));
      continue;
    }
    const rx = new RegExp(
      "^" +
        segment
          .replace(/[.+^${}()|[\]\\]/g, "\\$&")
          .replace(/\*/g, ".*")
          .replace(/\?/g, ".") +
        "$",
    );
    const expanded: string[] = [];
    for (const base of current) {
      let entries: string[];
      try {
        entries = readdirSync(base);
      } catch {
        continue;
      }
      for (const entry of entries.sort()) {
        if (rx.test(entry)) expanded.push(join(base, entry));
      }
    }
    current = expanded;
  }
  return current;
}

function renderCsv(csvPath: string, opts: Options, log: (line: string) => void): void {
  const figures = buildFigures(readErrorRows(readFileSync(csvPath, "utf8")));
  for (const fig of figures) {
    const out = join(opts.out, `convergence_${fig.name}.png`);
    writeFileSync(out, renderConvergence(fig, { dpi: opts.dpi }));
    log(`wrote ${out}`);
  }
}

function renderRunDir(dir: string, opts: Options, log: (line: string) => void): void {
  for (const run of discoverRuns(dir)) {
    if (opts.kind !== "fields") {
      renderCsv(join(run.dir, run.manifest.csv), opts, log);
    }
    if (opts.kind !== "convergence") {
      for (const job of triptychJobs(run.dir, run.manifest)) {
        const out = join(opts.out, `fields_${job.stem}.png`);
        writeFileSync(out, renderTriptychFiles(job.fine, job.blocks, {
          dpi: opts.dpi,
          title: job.stem,
        }));
        log(`wrote ${out}`);
      }
    }
  }
}

export function main(
  argv: string[],
  log: (line: string) => void = console.log,
  error: (line: string) => void = console.error,
): number {
  let opts: Options | "help";
  try {
    opts = parseArgs(argv);
  } catch (err) {
    error(`error: ${(err as Error).message}`);
    error(USAGE);
    return 2;
  }
  if (opts === "help") {
    log(USAGE);
    return 0;
  }
  mkdirSync(opts.out, { recursive: true });
  let failures = 0;
  for (const pattern of opts.inputs) {
    const paths = expandGlob(pattern);
    if (paths.length === 0) {
      error(`error: ${pattern}: no matches`);
      failures++;
      continue;
    }
    for (const path of paths) {
      try {
        const st = statSync(path);
        if (st.isDirectory()) {
          renderRunDir(path, opts, log);
        } else if (path.endsWith(".csv")) {
          renderCsv(path, opts, log);
        } else {
          throw new Error("not a run directory or CSV file");
        }
      } catch (err) {
        error(`error: ${path}: ${(err as Error).message}`);
        failures++;
      }
    }
  }
  return failures > 0 ? 1 : 0;
}

const invoked = process.argv[1];
if (invoked !== undefined) {
  let isMain = false;
  try {
    isMain = import.meta.url === pathToFileURL(realpathSync(invoked)).href;
  } catch {
    isMain = false;
  }
  if (isMain) {
    process.exit(main(process.argv.slice(2)));
  }
}
