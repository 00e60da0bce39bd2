"""Legacy ASCII VTK output for fine fields and coarse block fields.

Two writers: triangle meshes with point data (fine-scale and downscaled
solutions), and coarse quad grids with cell data (block averages).  Both
emit version 2.0 legacy files readable by common viewers and by any
downstream plotting tool.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch
from .mesh import CoarseGrid, FineMesh


def _write_header(fh, title: str) -> None:
    fh.write("# vtk DataFile Version 2.0\n")
    fh.write(title[:255] + "\n")
    fh.write("ASCII\n")
    fh.write("DATASET UNSTRUCTURED_GRID\n")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_vtk_triangles(path, mesh: FineMesh, fields: dict, title: str = "fine field") -> None:
    """Triangle mesh with point data.

    ``fields`` maps names to arrays of length n_nodes (scalars) or shape
    (n_nodes, 2) / length 2*n_nodes (vectors, written with zero z).
    """
    N = mesh.n_nodes
    with open(path, "w") as fh:
        _write_header(fh, title)
        fh.write(f"POINTS {N} double\n")
        for x, y in mesh.node_xy:
            fh.write(f"{_fmt(x)} {_fmt(y)} 0\n")
        T = mesh.n_triangles
        fh.write(f"CELLS {T} {4 * T}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {T}\n")
        fh.write("5\n" * T)
        if fields:
            fh.write(f"POINT_DATA {N}\n")
        for name, values in fields.items():
            v = np.asarray(values)
            if v.ndim == 1 and v.shape[0] == 2 * N:
                v = np.stack([v[:N], v[N:]], axis=1)
            if v.ndim == 1:
                if v.shape[0] != N:
                    raise DimensionMismatch(f"field {name}: length {v.shape[0]}")
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for x in v:
                    fh.write(_fmt(x) + "\n")
            else:
                if v.shape != (N, 2):
                    raise DimensionMismatch(f"field {name}: shape {v.shape}")
                fh.write(f"VECTORS {name} double\n")
                for x, y in v:
                    fh.write(f"{_fmt(x)} {_fmt(y)} 0\n")


def write_vtk_blocks(path, mesh: FineMesh, grid: CoarseGrid, fields: dict,
                     title: str = "block averages") -> None:
    """Coarse grid of quads with one cell-data value per block.

    ``fields`` maps names to arrays of length n_blocks (scalars) or shape
    (n_blocks, 2) (vectors).
    """
    geom = mesh.geom
    nx, ny = grid.nx, grid.ny
    Hx = (geom.x1 - geom.x0) / nx
    Hy = (geom.y1 - geom.y0) / ny
    npts = (nx + 1) * (ny + 1)
    with open(path, "w") as fh:
        _write_header(fh, title)
        fh.write(f"POINTS {npts} double\n")
        for j in range(ny + 1):
            for i in range(nx + 1):
                fh.write(f"{_fmt(geom.x0 + i * Hx)} {_fmt(geom.y0 + j * Hy)} 0\n")
        nb = grid.n_blocks
        fh.write(f"CELLS {nb} {5 * nb}\n")
        for b in range(nb):
            r, c = grid.block_rc[b]
            p0 = r * (nx + 1) + c
            p1 = p0 + 1
            p2 = p1 + (nx + 1)
            p3 = p0 + (nx + 1)
            fh.write(f"4 {p0} {p1} {p2} {p3}\n")
        fh.write(f"CELL_TYPES {nb}\n")
        fh.write("9\n" * nb)
        if fields:
            fh.write(f"CELL_DATA {nb}\n")
        for name, values in fields.items():
            v = np.asarray(values)
            if v.ndim == 1:
                if v.shape[0] != nb:
                    raise DimensionMismatch(f"field {name}: length {v.shape[0]}")
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for x in v:
                    fh.write(_fmt(x) + "\n")
            else:
                if v.shape != (nb, 2):
                    raise DimensionMismatch(f"field {name}: shape {v.shape}")
                fh.write(f"VECTORS {name} double\n")
                for x, y in v:
                    fh.write(f"{_fmt(x)} {_fmt(y)} 0\n")
