"""Perforated-domain geometry: domain rectangle, perforations, boundary rules.

A geometry is a rectangle with a list of circular perforations and a choice
of outer-boundary sides carrying homogeneous Dirichlet conditions (all other
outer sides are zero-flux).  Geometries are read from / written to a small
line-oriented text format (see :func:`read_geometry`) and can be produced by
a seeded jittered-lattice generator so experiment layouts are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GeometryError

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Perforation:
    """A circular hole with a 1-based global id."""

    id: int
    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class PerforatedGeometry:
    """Axis-aligned rectangle with disjoint circular perforations.

    ``dirichlet_sides`` lists outer sides (of ``SIDES``) clamped to zero;
    every other outer side is natural (zero flux).  ``metadata`` carries
    free-form provenance tokens (generator seed etc.) echoed into outputs.
    """

    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0
    perforations: tuple[Perforation, ...] = ()
    dirichlet_sides: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise GeometryError("domain rectangle has non-positive extent")
        for s in self.dirichlet_sides:
            if s not in SIDES:
                raise GeometryError(f"unknown boundary side {s!r}")
        ids = [p.id for p in self.perforations]
        if ids != list(range(1, len(ids) + 1)):
            raise GeometryError("perforation ids must be 1..L in order")
        for p in self.perforations:
            if p.r <= 0:
                raise GeometryError(f"perforation {p.id} has non-positive radius")
            if (
                p.cx - p.r <= self.x0
                or p.cx + p.r >= self.x1
                or p.cy - p.r <= self.y0
                or p.cy + p.r >= self.y1
            ):
                raise GeometryError(
                    f"perforation {p.id} touches or crosses the outer boundary"
                )

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def min_clearance(self) -> float:
        """Smallest gap between any two perforation boundaries (inf if < 2)."""
        perfs = self.perforations
        if len(perfs) < 2:
            return np.inf
        c = np.array([[p.cx, p.cy] for p in perfs])
        r = np.array([p.r for p in perfs])
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
        gap = d - r[:, None] - r[None, :]
        np.fill_diagonal(gap, np.inf)
        return float(gap.min())

    def contains_point(self, x, y):
        """True for points inside the rectangle and outside every perforation.

        Accepts scalars or arrays; vectorized over the inputs.
        """
        x = np.asarray(x)
        y = np.asarray(y)
        inside = (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)
        for p in self.perforations:
            inside &= (x - p.cx) ** 2 + (y - p.cy) ** 2 > p.r**2
        return inside


def generate_layout(
    nx: int,
    ny: int,
    r_min: float,
    r_max: float,
    jitter: float,
    seed: int,
    rect: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0),
    dirichlet_sides: tuple[str, ...] = (),
) -> PerforatedGeometry:
    """Place one disk per cell of an ``nx`` x ``ny`` lattice, jittered.

    Centers are lattice cell centers displaced by uniform offsets in
    ``[-jitter, jitter]^2``; radii are uniform in ``[r_min, r_max]``.  The
    draw order is row-major and fully determined by ``seed``, which is
    recorded in the geometry metadata.
    """
    x0, y0, x1, y1 = rect
    dx = (x1 - x0) / nx
    dy = (y1 - y0) / ny
    if r_max + jitter >= min(dx, dy) / 2:
        raise GeometryError("radius plus jitter exceeds half the lattice pitch")
    rng = np.random.default_rng(seed)
    perfs = []
    pid = 1
    for j in range(ny):
        for i in range(nx):
            cx = x0 + (i + 0.5) * dx + rng.uniform(-jitter, jitter)
            cy = y0 + (j + 0.5) * dy + rng.uniform(-jitter, jitter)
            r = rng.uniform(r_min, r_max)
            perfs.append(Perforation(pid, cx, cy, r))
            pid += 1
    meta = {
        "generator": "grid-jitter",
        "seed": seed,
        "lattice": f"{nx}x{ny}",
        "r_min": r_min,
        "r_max": r_max,
        "jitter": jitter,
    }
    return PerforatedGeometry(
        x0, y0, x1, y1, tuple(perfs), tuple(dirichlet_sides), meta
    )


def write_geometry(geom: PerforatedGeometry, path) -> None:
    """Write the line-oriented geometry format (see :func:`read_geometry`)."""
    lines = ["# perforated geometry"]
    lines.append(f"rect {geom.x0:.17g} {geom.y0:.17g} {geom.x1:.17g} {geom.y1:.17g}")
    if geom.dirichlet_sides:
        lines.append("outer_dirichlet " + " ".join(geom.dirichlet_sides))
    for k, v in geom.metadata.items():
        lines.append(f"meta {k} {v}")
    for p in geom.perforations:
        lines.append(f"perf {p.id} {p.cx:.17g} {p.cy:.17g} {p.r:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_geometry(path) -> PerforatedGeometry:
    """Parse a geometry file.

    Format: one record per line, ``#`` comments and blank lines ignored.

    =================  =====================================================
    ``rect x0 y0 x1 y1``       domain rectangle
    ``outer_dirichlet s...``   sides (left/right/bottom/top) clamped to zero
    ``meta key value``         free-form metadata, echoed to outputs
    ``perf id cx cy r``        circular perforation, ids 1..L in order
    =================  =====================================================
    """
    rect = None
    dirichlet: tuple[str, ...] = ()
    meta: dict = {}
    perfs: list[Perforation] = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        try:
            if key == "rect":
                x0, y0, x1, y1 = (float(t) for t in tok[1:5])
                rect = (x0, y0, x1, y1)
            elif key == "outer_dirichlet":
                dirichlet = tuple(tok[1:])
            elif key == "meta":
                meta[tok[1]] = " ".join(tok[2:])
            elif key == "perf":
                perfs.append(
                    Perforation(int(tok[1]), float(tok[2]), float(tok[3]), float(tok[4]))
                )
            else:
                raise ConfigError(f"{path}:{ln}: unknown record {key!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}:{ln}: malformed record: {raw!r}") from exc
    if rect is None:
        raise ConfigError(f"{path}: missing 'rect' record")
    return PerforatedGeometry(*rect, tuple(perfs), dirichlet, meta)
