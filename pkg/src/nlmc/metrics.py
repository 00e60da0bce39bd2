"""Cell-average fields and the relative coarse-cell error metric.

The accuracy measure throughout is the relative L2 distance between
per-block means of two fine fields (or of a fine field and the coarse
background unknowns), reported in percent and weighted by the in-domain
block areas.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroReference
from .mesh import CoarseGrid, FineMesh


@dataclass
class CellAverageField:
    """Per-block mean values; columns are displacement components for
    vector fields (shape (N_c,) scalar, (N_c, 2) vector)."""

    values: np.ndarray
    weights: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]

    def component(self, idx: int) -> "CellAverageField":
        if self.values.ndim == 1:
            raise DimensionMismatch("scalar field has no components")
        return CellAverageField(self.values[:, idx], self.weights)


def cell_average(u_fine: np.ndarray, mesh: FineMesh, grid: CoarseGrid) -> CellAverageField:
    """Exact P1 block means, normalized by in-domain block area."""
    N = mesh.n_nodes
    if u_fine.shape[0] == N:
        comps = [u_fine]
    elif u_fine.shape[0] == 2 * N:
        comps = [u_fine[:N], u_fine[N:]]
    else:
        raise DimensionMismatch(
            f"field length {u_fine.shape[0]} does not match mesh ({N} nodes)"
        )
    cols = []
    for u in comps:
        tri_int = mesh.tri_area * u[mesh.triangles].mean(axis=1)
        acc = np.zeros(grid.n_blocks)
        np.add.at(acc, grid.block_of, tri_int)
        cols.append(acc / grid.block_area)
    values = cols[0] if len(cols) == 1 else np.stack(cols, axis=1)
    return CellAverageField(values=values, weights=grid.block_area.copy())


def coarse_background_field(system_labels, u_bar: np.ndarray, grid: CoarseGrid,
                            direction: str = "") -> CellAverageField:
    """Background-continuum coarse unknowns as a cell-average field."""
    vals = np.zeros(grid.n_blocks)
    seen = np.zeros(grid.n_blocks, dtype=bool)
    for r, lab in enumerate(system_labels):
        if lab.continuum == 0 and lab.direction == direction:
            vals[lab.block] = u_bar[r]
            seen[lab.block] = True
    if not seen.all():
        raise DimensionMismatch("missing background rows for some blocks")
    return CellAverageField(values=vals, weights=grid.block_area.copy())


def relative_l2(ref: CellAverageField, test: CellAverageField,
                weighted: bool = True) -> float:
    """100 * sqrt(sum w (ref-test)^2 / sum w ref^2) over blocks."""
    if ref.values.shape != test.values.shape:
        raise DimensionMismatch("field shapes differ")
    if ref.values.ndim != 1:
        raise DimensionMismatch("compare one component at a time")
    w = ref.weights if weighted else np.ones_like(ref.weights)
    denom = float(w @ ref.values**2)
    if denom == 0.0:
        raise ZeroReference("reference field has zero norm")
    num = float(w @ (ref.values - test.values) ** 2)
    return 100.0 * np.sqrt(num / denom)


CSV_COLUMNS = [
    "scenario",
    "problem",
    "grid",
    "basis_type",
    "layers",
    "snapshot_step",
    "snapshot_time",
    "component",
    "error_pct",
    "reference_pct",
    "dof_f",
    "dof_c",
    "status",
]


@dataclass
class ErrorReport:
    """One table cell: scenario, discretization, basis config, error.

    ``snapshot_step`` is empty for steady problems; ``component`` is empty
    for scalars, 'x' or 'y' for elasticity.  ``reference_pct`` carries a
    published reference value when one exists for the same cell structure.
    ``status`` is 'ok' or 'failed:<reason>'.
    """

    scenario: str
    problem: str
    grid: str
    basis_type: int
    layers: int
    dof_f: int
    dof_c: int
    error_pct: float | None = None
    snapshot_step: int | None = None
    snapshot_time: float | None = None
    component: str = ""
    reference_pct: float | None = None
    status: str = "ok"

    def to_row(self) -> list:
        def fmt(v, spec="{}"):
            return "" if v is None else spec.format(v)

        return [
            self.scenario,
            self.problem,
            self.grid,
            str(self.basis_type),
            str(self.layers),
            fmt(self.snapshot_step),
            fmt(self.snapshot_time, "{:.10g}"),
            self.component,
            fmt(self.error_pct, "{:.6f}"),
            fmt(self.reference_pct, "{:.6f}"),
            str(self.dof_f),
            str(self.dof_c),
            self.status,
        ]

    @staticmethod
    def from_row(row: list) -> "ErrorReport":
        def opt(v, cast):
            return None if v == "" else cast(v)

        return ErrorReport(
            scenario=row[0],
            problem=row[1],
            grid=row[2],
            basis_type=int(row[3]),
            layers=int(row[4]),
            snapshot_step=opt(row[5], int),
            snapshot_time=opt(row[6], float),
            component=row[7],
            error_pct=opt(row[8], float),
            reference_pct=opt(row[9], float),
            dof_f=int(row[10]),
            dof_c=int(row[11]),
            status=row[12],
        )


def write_error_csv(path, reports, append: bool = False) -> None:
    """RFC-4180 CSV, one row per report, header on fresh files."""
    mode = "a" if append else "w"
    fresh = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        if fresh:
            w.writerow(CSV_COLUMNS)
        for rep in reports:
            w.writerow(rep.to_row())


def read_error_csv(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        return [ErrorReport.from_row(row) for row in r]
