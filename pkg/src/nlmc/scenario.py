"""Scenario configuration: schema, TOML loading, resolved-copy output.

A scenario file describes one experiment family: the problem class, the
geometry source, fine/coarse discretizations, the oversampling sweep,
material and boundary data, and (for time-dependent runs) the stepping
plan.  See ``SCHEMA`` for the full layout.  Every run writes a resolved
copy of its configuration next to the outputs.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .fem import MaterialParams
from .geometry import PerforatedGeometry, generate_layout, read_geometry

SCHEMA = """\
[scenario]   name, problem = laplace|elasticity|parabolic, basis_types = [1,2]
[geometry]   file = "path"  (or)  [geometry.generator] nx, ny, r_min, r_max,
             jitter, seed
[fine]       n  (cells per side; must be divisible by every coarse size)
[[grids]]    nx, ny, layers = [..]   (one table per coarse grid)
[material]   k, c, E, nu
[source]     f            (scalar, or [fx, fy] for elasticity)
[outer_bc]   dirichlet_sides = ["left", ...], mode = roller|clamp
[perforation_bc]  kind = neumann|robin, g (or [gx, gy]), alpha
[time]       t_max, n_steps, snapshots = [..]   (parabolic only)
[output]     fields = none|final|all
"""

PROBLEMS = ("laplace", "elasticity", "parabolic")
SIDES = ("left", "right", "bottom", "top")


@dataclass
class GridSpec:
    nx: int
    ny: int
    layers: list

    @property
    def tag(self) -> str:
        return f"{self.nx}x{self.ny}"


@dataclass
class ScenarioSpec:
    name: str
    problem: str
    basis_types: list
    fine_n: int
    grids: list
    geometry_file: str | None = None
    generator: dict | None = None
    material: MaterialParams = field(default_factory=MaterialParams)
    f: object = 0.0
    dirichlet_sides: tuple = ()
    outer_mode: str = "roller"
    bc_kind: str = "neumann"
    g: object = 0.0
    alpha: float = 0.0
    t_max: float | None = None
    n_steps: int | None = None
    snapshots: list = field(default_factory=list)
    u0: float = 0.0
    fields: str = "final"

    @property
    def tau(self) -> float:
        return self.t_max / self.n_steps

    def is_parabolic(self) -> bool:
        return self.problem == "parabolic"


def _req(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing '{key}' in [{where}]")
    return table[key]


def _pair(v, where: str):
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, list) and len(v) == 2:
        return (float(v[0]), float(v[1]))
    raise ConfigError(f"{where}: expected a number or a pair, got {v!r}")


def load_scenario(path) -> ScenarioSpec:
    """Parse and validate a scenario TOML file."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    sc = raw.get("scenario") or {}
    name = _req(sc, "name", "scenario")
    problem = _req(sc, "problem", "scenario")
    if problem not in PROBLEMS:
        raise ConfigError(f"unknown problem '{problem}', expected one of {PROBLEMS}")
    basis_types = sc.get("basis_types", [1, 2])
    if not basis_types or any(t not in (1, 2) for t in basis_types):
        raise ConfigError("basis_types must be a non-empty subset of [1, 2]")

    geo = raw.get("geometry") or {}
    geometry_file = geo.get("file")
    generator = geo.get("generator")
    if geometry_file is None and generator is None:
        raise ConfigError("geometry needs either 'file' or a [geometry.generator]")
    if geometry_file is not None and not os.path.isabs(geometry_file):
        geometry_file = os.path.join(os.path.dirname(os.path.abspath(path)),
                                     geometry_file)

    fine = raw.get("fine") or {}
    fine_n = int(_req(fine, "n", "fine"))
    if fine_n <= 0:
        raise ConfigError("fine.n must be positive")

    grids_raw = raw.get("grids") or []
    if not grids_raw:
        raise ConfigError("at least one [[grids]] table required")
    grids = []
    for g in grids_raw:
        nx, ny = int(_req(g, "nx", "grids")), int(_req(g, "ny", "grids"))
        layers = [int(s) for s in _req(g, "layers", "grids")]
        if not layers or min(layers) < 1:
            raise ConfigError(f"grid {nx}x{ny}: layers must be positive")
        if fine_n % nx or fine_n % ny:
            raise ConfigError(
                f"fine.n = {fine_n} not divisible by coarse {nx}x{ny}"
            )
        grids.append(GridSpec(nx=nx, ny=ny, layers=sorted(set(layers))))

    mat = raw.get("material") or {}
    try:
        material = MaterialParams(
            k=float(mat.get("k", 1.0)),
            c=float(mat.get("c", 1.0)),
            E=float(mat.get("E", 1.0)),
            nu=float(mat.get("nu", 0.3)),
        )
    except ValueError as exc:
        raise ConfigError(f"[material]: {exc}") from exc

    src = raw.get("source") or {}
    f = _pair(src.get("f", 0.0), "source.f")

    outer = raw.get("outer_bc") or {}
    sides = tuple(outer.get("dirichlet_sides", ()))
    for s in sides:
        if s not in SIDES:
            raise ConfigError(f"unknown side '{s}', expected one of {SIDES}")
    mode = outer.get("mode", "roller")
    if mode not in ("roller", "clamp"):
        raise ConfigError(f"outer_bc.mode must be roller or clamp, got '{mode}'")

    pbc = raw.get("perforation_bc") or {}
    kind = pbc.get("kind", "neumann")
    if kind not in ("neumann", "robin"):
        raise ConfigError("perforation_bc.kind must be neumann or robin")
    g = _pair(pbc.get("g", 0.0), "perforation_bc.g")
    alpha = float(pbc.get("alpha", 0.0))
    if kind == "robin" and alpha < 0:
        raise ConfigError("robin alpha must be non-negative")

    tmo = raw.get("time") or {}
    t_max = n_steps = None
    snapshots = []
    if problem == "parabolic":
        t_max = float(_req(tmo, "t_max", "time"))
        n_steps = int(_req(tmo, "n_steps", "time"))
        if t_max <= 0 or n_steps <= 0:
            raise ConfigError("time.t_max and time.n_steps must be positive")
        snapshots = [int(s) for s in tmo.get("snapshots", [n_steps])]
        if any(s < 1 or s > n_steps for s in snapshots):
            raise ConfigError("snapshot indices must lie in [1, n_steps]")
    elif tmo:
        raise ConfigError("[time] only applies to parabolic scenarios")

    out = raw.get("output") or {}
    fields = out.get("fields", "final")
    if fields not in ("none", "final", "all"):
        raise ConfigError("output.fields must be none, final or all")

    if problem == "elasticity":
        if not isinstance(f, tuple):
            f = (f, f)
        if not isinstance(g, tuple):
            g = (g, g)

    return ScenarioSpec(
        name=name,
        problem=problem,
        basis_types=list(basis_types),
        fine_n=fine_n,
        grids=grids,
        geometry_file=geometry_file,
        generator=generator,
        material=material,
        f=f,
        dirichlet_sides=sides,
        outer_mode=mode,
        bc_kind=kind,
        g=g,
        alpha=alpha,
        t_max=t_max,
        n_steps=n_steps,
        snapshots=snapshots,
        u0=float(tmo.get("u0", 0.0)) if tmo else 0.0,
        fields=fields,
    )


def geometry_for(spec: ScenarioSpec) -> PerforatedGeometry:
    """Materialize the scenario geometry with the scenario's outer BC sides."""
    if spec.geometry_file is not None:
        geom = read_geometry(spec.geometry_file)
    else:
        gen = dict(spec.generator)
        geom = generate_layout(
            nx=int(gen["nx"]),
            ny=int(gen["ny"]),
            r_min=float(gen["r_min"]),
            r_max=float(gen["r_max"]),
            jitter=float(gen.get("jitter", 0.0)),
            seed=int(gen.get("seed", 0)),
        )
    return dataclasses.replace(geom, dirichlet_sides=spec.dirichlet_sides)


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        s = repr(v)
        return s if any(c in s for c in ".eE") else s + ".0"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def write_resolved(spec: ScenarioSpec, path) -> None:
    """Write the fully resolved configuration back out as TOML."""
    lines = ["# resolved scenario configuration", "", "[scenario]"]
    lines.append(f"name = {_toml_scalar(spec.name)}")
    lines.append(f"problem = {_toml_scalar(spec.problem)}")
    lines.append(f"basis_types = {_toml_scalar(spec.basis_types)}")
    lines.append("")
    lines.append("[geometry]")
    if spec.geometry_file is not None:
        lines.append(f"file = {_toml_scalar(spec.geometry_file)}")
    if spec.generator is not None:
        lines.append("[geometry.generator]")
        for k, v in spec.generator.items():
            lines.append(f"{k} = {_toml_scalar(v)}")
    lines.append("")
    lines.append("[fine]")
    lines.append(f"n = {spec.fine_n}")
    for g in spec.grids:
        lines.append("")
        lines.append("[[grids]]")
        lines.append(f"nx = {g.nx}")
        lines.append(f"ny = {g.ny}")
        lines.append(f"layers = {_toml_scalar(g.layers)}")
    lines.append("")
    lines.append("[material]")
    for k in ("k", "c", "E", "nu"):
        lines.append(f"{k} = {_toml_scalar(getattr(spec.material, k))}")
    lines.append("")
    lines.append("[source]")
    lines.append(f"f = {_toml_scalar(spec.f)}")
    lines.append("")
    lines.append("[outer_bc]")
    lines.append(f"dirichlet_sides = {_toml_scalar(list(spec.dirichlet_sides))}")
    lines.append(f"mode = {_toml_scalar(spec.outer_mode)}")
    lines.append("")
    lines.append("[perforation_bc]")
    lines.append(f"kind = {_toml_scalar(spec.bc_kind)}")
    lines.append(f"g = {_toml_scalar(spec.g)}")
    lines.append(f"alpha = {_toml_scalar(spec.alpha)}")
    if spec.is_parabolic():
        lines.append("")
        lines.append("[time]")
        lines.append(f"t_max = {_toml_scalar(spec.t_max)}")
        lines.append(f"n_steps = {spec.n_steps}")
        lines.append(f"snapshots = {_toml_scalar(spec.snapshots)}")
        lines.append(f"u0 = {_toml_scalar(spec.u0)}")
    lines.append("")
    lines.append("[output]")
    lines.append(f"fields = {_toml_scalar(spec.fields)}")
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
