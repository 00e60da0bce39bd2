"""Command-line front end.

Subcommands: ``mesh`` (geometry + mesh stats and export), ``basis``
(build/cache bases, optional single-basis export), ``solve`` (steady
problems), ``march`` (time-dependent problems), ``errors`` (full sweep of
one scenario), ``reproduce`` (shipped study tables).  Exit code is
nonzero iff any scenario cell failed.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import basis as basis_mod
from . import experiments
from .errors import ConfigError, NlmcError
from .mesh import build_coarse_grid, build_fine_mesh, index_perforation_segments
from .scenario import geometry_for, load_scenario
from .vtk_io import write_vtk_triangles


def _add_common(p):
    p.add_argument("--config", required=True, help="scenario TOML path")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--cache", default=None, help="basis cache directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _parse_grid(value: str):
    try:
        nx, ny = value.lower().split("x")
        return int(nx), int(ny)
    except ValueError as exc:
        raise ConfigError(f"bad grid '{value}', expected NXxNY") from exc


def _setup(spec, grid_arg):
    geom = geometry_for(spec)
    mesh = build_fine_mesh(geom, (geom.x1 - geom.x0) / spec.fine_n)
    if grid_arg is None:
        g = spec.grids[0]
        nx, ny = g.nx, g.ny
    else:
        nx, ny = _parse_grid(grid_arg)
    grid = build_coarse_grid(mesh, nx, ny)
    segments = index_perforation_segments(mesh, grid)
    return mesh, grid, segments


def cmd_mesh(args) -> int:
    spec = load_scenario(args.config)
    mesh, grid, segments = _setup(spec, args.grid)
    os.makedirs(args.out, exist_ok=True)
    print(f"geometry: {len(mesh.geom.perforations)} perforations")
    print(f"fine mesh: {mesh.nfx}x{mesh.nfy} cells, h = {mesh.h:.6g}")
    print(f"  nodes (lattice/active): {mesh.n_nodes}/{int(mesh.active_nodes.sum())}")
    print(f"  triangles: {mesh.n_triangles}")
    print(f"  perforation edges: {len(mesh.edges_with_tag(0))}")
    print(f"coarse grid: {grid.nx}x{grid.ny}, {grid.n_blocks} blocks")
    n_comp = len(segments.components)
    print(f"  perforation segments: {n_comp}")
    path = os.path.join(args.out, "mesh.vtk")
    perf_mask = mesh.perf_node_mask().astype(float)
    write_vtk_triangles(path, mesh, {"on_perforation": perf_mask},
                        title="fine mesh")
    print(f"wrote {path}")
    return 0


def cmd_basis(args) -> int:
    spec = load_scenario(args.config)
    mesh, grid, segments = _setup(spec, args.grid)
    kind = "elasticity" if spec.problem == "elasticity" else "scalar"
    s = args.layers if args.layers else spec.grids[0].layers[-1]
    pm = experiments.load_or_build_basis(
        mesh, grid, segments, s, args.type, kind=kind,
        params=spec.material, cache_dir=args.cache, n_jobs=args.jobs,
        outer_mode=spec.outer_mode,
    )
    print(f"basis: {pm.n_rows} rows (type {pm.basis_type}, s={pm.layers})")
    if args.block is not None:
        rows = [
            r
            for r, lab in enumerate(pm.labels)
            if lab.block == args.block and lab.continuum == args.continuum
        ]
        if not rows:
            print(f"no basis row for block {args.block} continuum "
                  f"{args.continuum}", file=sys.stderr)
            return 1
        os.makedirs(args.out, exist_ok=True)
        fields = {}
        for r in rows:
            lab = pm.labels[r]
            name = f"psi_b{lab.block}_m{lab.continuum}"
            if lab.direction:
                name += f"_{lab.direction}"
            fields[name] = pm.row(r)
        path = os.path.join(
            args.out, f"basis_b{args.block}_m{args.continuum}.vtk"
        )
        write_vtk_triangles(path, mesh, fields, title="multiscale basis")
        psi = pm.row(rows[0])
        prof = basis_mod.basis_decay_profile(psi, mesh, grid, args.block)
        print("decay profile (l2 mass fraction per layer):")
        for d, frac in enumerate(prof):
            print(f"  d={d}: {frac:.3e}")
        print(f"wrote {path}")
    return 0


def _run_one(args, want_parabolic: bool) -> int:
    spec = load_scenario(args.config)
    if spec.is_parabolic() != want_parabolic:
        kind = "march" if want_parabolic else "solve"
        print(f"{kind} expects a "
              f"{'parabolic' if want_parabolic else 'steady'} scenario",
              file=sys.stderr)
        return 2
    if args.grid is not None:
        nx, ny = _parse_grid(args.grid)
        spec.grids = [g for g in spec.grids if (g.nx, g.ny) == (nx, ny)]
        if not spec.grids:
            print(f"grid {args.grid} not in scenario", file=sys.stderr)
            return 2
    if args.layers:
        for g in spec.grids:
            g.layers = [s for s in g.layers if s in args.layers]
    if args.type:
        spec.basis_types = [t for t in spec.basis_types if t in args.type]
    reports = experiments.run_scenario(
        spec, args.out, cache_dir=args.cache, n_jobs=args.jobs
    )
    _print_reports(reports)
    return 1 if any(r.status != "ok" for r in reports) else 0


def _print_reports(reports) -> None:
    print(f"{'grid':>7} {'type':>4} {'s':>3} {'step':>5} {'comp':>4} "
          f"{'error %':>10} {'reference %':>12} {'status':>8}")
    for r in reports:
        err = "" if r.error_pct is None else f"{r.error_pct:10.3f}"
        ref = "" if r.reference_pct is None else f"{r.reference_pct:12.3f}"
        step = "" if r.snapshot_step is None else str(r.snapshot_step)
        print(f"{r.grid:>7} {r.basis_type:>4} {r.layers:>3} {step:>5} "
              f"{r.component:>4} {err:>10} {ref:>12} {r.status:>8}")


def cmd_solve(args) -> int:
    return _run_one(args, want_parabolic=False)


def cmd_march(args) -> int:
    return _run_one(args, want_parabolic=True)


def cmd_errors(args) -> int:
    spec = load_scenario(args.config)
    reports = experiments.run_scenario(
        spec, args.out, cache_dir=args.cache, n_jobs=args.jobs
    )
    _print_reports(reports)
    print(f"wrote {os.path.join(args.out, 'errors.csv')}")
    return 1 if any(r.status != "ok" for r in reports) else 0


def cmd_reproduce(args) -> int:
    names = args.scenarios.split(",") if args.scenarios else None
    reports = experiments.reproduce_tables(
        args.out, cache_dir=args.cache, n_jobs=args.jobs, scenarios=names
    )
    _print_reports(reports)
    print(f"wrote {os.path.join(args.out, 'tables.csv')}")
    return 1 if any(r.status != "ok" for r in reports) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nlmc",
        description="Non-local multicontinuum upscaling on perforated domains",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build and inspect the fine mesh")
    _add_common(p)
    p.add_argument("--grid", default=None, help="coarse grid, e.g. 20x20")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("basis", help="build multiscale bases")
    _add_common(p)
    p.add_argument("--grid", default=None)
    p.add_argument("--type", type=int, default=2, choices=(1, 2))
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--block", type=int, default=None,
                   help="export this block's basis as VTK")
    p.add_argument("--continuum", type=int, default=0)
    p.set_defaults(func=cmd_basis)

    for name, fn, hlp in (
        ("solve", cmd_solve, "steady fine + coarse solve with errors"),
        ("march", cmd_march, "time march fine + coarse with errors"),
    ):
        p = sub.add_parser(name, help=hlp)
        _add_common(p)
        p.add_argument("--grid", default=None)
        p.add_argument("--type", type=int, action="append", default=None)
        p.add_argument("--layers", type=int, action="append", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("errors", help="full error sweep of one scenario")
    _add_common(p)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("reproduce", help="run the shipped study scenarios")
    p.add_argument("--out", default="out")
    p.add_argument("--cache", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--scenarios", default=None,
                   help="comma-separated subset of shipped scenario names")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (NlmcError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
