export { buildFigures, parseCsv, readErrorRows, COLUMNS } from "./csv.js";
export type { Curve, CurvePoint, ErrorRow, Figure } from "./csv.js";
export { SchemaMismatch, UnreadableFile } from "./errors.js";
export { renderConvergence } from "./convergence.js";
export { panelData, renderPanel, renderTriptych, renderTriptychFiles } from "./fields.js";
export { colormap, normalize, sharedScale } from "./colormap.js";
export { discoverRuns, loadManifest, triptychJobs } from "./manifest.js";
export type { BundleManifest, FieldEntry, RunManifest, TriptychJob } from "./manifest.js";
export { parseVtk, readVtk, triangles, quads, dataByName, displayValues } from "./vtk.js";
export type { DataArray, VtkGrid } from "./vtk.js";
export { encodePng, crc32 } from "./png.js";
export { Canvas } from "./raster.js";
export { main } from "./cli.js";
