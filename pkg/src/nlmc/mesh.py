"""Fine triangulation of a perforated rectangle and its coarse partition.

The fine mesh is a structured right-triangle subdivision of a uniform quad
lattice.  Perforations are resolved by removing every triangle whose centroid
falls inside a hole; the exposed internal edges become the (staircase) hole
boundary.  Coarse blocks are axis-aligned unions of fine cells so block
integrals are exact sums of triangle integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyBlock,
    GeometryError,
    NonNestedGrids,
    PerforationOverlap,
    PerforationTooSmall,
)
from .geometry import PerforatedGeometry

# boundary edge tags
PERF = 0
DIRICHLET = 1
NEUMANN = 2

MIN_TRIANGLES_PER_PERFORATION = 4


@dataclass
class FineMesh:
    """Structured P1 triangulation with tagged boundary edges.

    Nodes live on the full ``(nfx+1) x (nfy+1)`` lattice; triangles reference
    the subset outside perforations.  Boundary edges are stored as parallel
    arrays: node pair, tag (PERF / DIRICHLET / NEUMANN), perforation id
    (0 for outer edges) and the kept triangle owning the edge.
    """

    geom: PerforatedGeometry
    h: float
    nfx: int
    nfy: int
    node_xy: np.ndarray  # (n_nodes, 2)
    triangles: np.ndarray  # (n_tri, 3) node ids, CCW
    tri_cell: np.ndarray  # (n_tri, 2) lattice cell (ci, cj)
    tri_area: np.ndarray  # (n_tri,)
    edge_nodes: np.ndarray  # (n_edge, 2)
    edge_tag: np.ndarray  # (n_edge,)
    edge_perf: np.ndarray  # (n_edge,)
    edge_owner: np.ndarray  # (n_edge,)

    @property
    def n_nodes(self) -> int:
        return self.node_xy.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def active_nodes(self) -> np.ndarray:
        """Boolean mask of lattice nodes referenced by some triangle."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.triangles.ravel()] = True
        return mask

    def edge_length(self, edge_ids=None) -> np.ndarray:
        e = self.edge_nodes if edge_ids is None else self.edge_nodes[edge_ids]
        d = self.node_xy[e[:, 0]] - self.node_xy[e[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def edges_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.edge_tag == tag)

    def dirichlet_node_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        d = self.edge_nodes[self.edge_tag == DIRICHLET]
        mask[d.ravel()] = True
        return mask

    def perf_node_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        p = self.edge_nodes[self.edge_tag == PERF]
        mask[p.ravel()] = True
        return mask

    def in_domain_area(self) -> float:
        return float(self.tri_area.sum())


def build_fine_mesh(geom: PerforatedGeometry, h: float) -> FineMesh:
    """Triangulate ``geom`` at target edge length ``h``.

    The rectangle is cut into square cells of size as close to ``h`` as an
    integer subdivision allows, each split along the (+1,+1) diagonal into
    two right triangles.  Triangles whose centroid lies inside a perforation
    are removed and the exposed edges tagged with that perforation's id;
    outer edges are tagged Dirichlet or Neumann from the geometry's side
    rules.

    Raises
    ------
    PerforationOverlap
        if two holes come closer than two fine-cell diameters.
    PerforationTooSmall
        if a hole removes fewer than 4 triangles at this resolution.
    """
    if h <= 0:
        raise GeometryError("h must be positive")
    nfx = max(1, round(geom.width / h))
    nfy = max(1, round(geom.height / h))
    hx = geom.width / nfx
    hy = geom.height / nfy

    cell_diam = float(np.hypot(hx, hy))
    if geom.min_clearance() < 2.0 * cell_diam:
        raise PerforationOverlap(
            "perforation clearance below two fine-cell diameters at this h"
        )

    xs = geom.x0 + hx * np.arange(nfx + 1)
    ys = geom.y0 + hy * np.arange(nfy + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    node_xy = np.column_stack([gx.ravel(), gy.ravel()])

    def nid(i, j):
        return j * (nfx + 1) + i

    ci, cj = np.meshgrid(np.arange(nfx), np.arange(nfy), indexing="xy")
    ci = ci.ravel()
    cj = cj.ravel()
    v00 = nid(ci, cj)
    v10 = nid(ci + 1, cj)
    v01 = nid(ci, cj + 1)
    v11 = nid(ci + 1, cj + 1)
    # lower triangle (v00,v10,v11), upper triangle (v00,v11,v01); both CCW
    all_tris = np.empty((2 * nfx * nfy, 3), dtype=np.int64)
    all_tris[0::2] = np.column_stack([v00, v10, v11])
    all_tris[1::2] = np.column_stack([v00, v11, v01])
    all_cells = np.empty((2 * nfx * nfy, 2), dtype=np.int64)
    all_cells[0::2] = np.column_stack([ci, cj])
    all_cells[1::2] = np.column_stack([ci, cj])

    centroids = node_xy[all_tris].mean(axis=1)
    removed_by = np.zeros(all_tris.shape[0], dtype=np.int64)
    for p in geom.perforations:
        inside = (centroids[:, 0] - p.cx) ** 2 + (centroids[:, 1] - p.cy) ** 2 < p.r**2
        if inside.sum() < MIN_TRIANGLES_PER_PERFORATION:
            raise PerforationTooSmall(
                f"perforation {p.id} removes only {int(inside.sum())} triangles "
                f"at h={h:g}"
            )
        removed_by[inside] = p.id
    kept = removed_by == 0
    tri_ids = np.flatnonzero(kept)
    triangles = all_tris[kept]
    tri_cell = all_cells[kept]
    area = 0.5 * hx * hy
    tri_area = np.full(triangles.shape[0], area)

    edge_nodes, edge_tag, edge_perf, edge_owner = _classify_edges(
        geom, node_xy, all_tris, removed_by, kept, nfx, nfy
    )

    return FineMesh(
        geom=geom,
        h=hx,
        nfx=nfx,
        nfy=nfy,
        node_xy=node_xy,
        triangles=triangles,
        tri_cell=tri_cell,
        tri_area=tri_area,
        edge_nodes=edge_nodes,
        edge_tag=edge_tag,
        edge_perf=edge_perf,
        edge_owner=edge_owner,
    )


def _classify_edges(geom, node_xy, all_tris, removed_by, kept, nfx, nfy):
    """Tag every boundary edge of the kept triangulation.

    Works on sorted node pairs over *all* lattice triangles: a pair incident
    to one kept and one removed triangle is a perforation edge; a pair on the
    lattice perimeter with a kept triangle is an outer edge.
    """
    n_all = all_tris.shape[0]
    pairs = all_tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    pairs_sorted = np.sort(pairs, axis=1)
    tri_of_pair = np.repeat(np.arange(n_all), 3)
    key = pairs_sorted[:, 0].astype(np.int64) * node_xy.shape[0] + pairs_sorted[:, 1]
    order = np.argsort(key, kind="stable")
    key_s = key[order]
    tri_s = tri_of_pair[order]
    pair_s = pairs_sorted[order]
    starts = np.flatnonzero(np.concatenate(([True], key_s[1:] != key_s[:-1])))
    counts = np.diff(np.concatenate((starts, [key_s.size])))

    kept_to_new = -np.ones(n_all, dtype=np.int64)
    kept_to_new[np.flatnonzero(kept)] = np.arange(int(kept.sum()))

    en, et, ep, eo = [], [], [], []
    x0, x1, y0, y1 = geom.x0, geom.x1, geom.y0, geom.y1
    dir_sides = set(geom.dirichlet_sides)

    def outer_tag(n0, n1):
        p0, p1 = node_xy[n0], node_xy[n1]
        if p0[0] == x0 and p1[0] == x0:
            side = "left"
        elif p0[0] == x1 and p1[0] == x1:
            side = "right"
        elif p0[1] == y0 and p1[1] == y0:
            side = "bottom"
        else:
            side = "top"
        return DIRICHLET if side in dir_sides else NEUMANN

    for s, c in zip(starts, counts):
        if c == 2:
            t0, t1 = tri_s[s], tri_s[s + 1]
            k0, k1 = kept[t0], kept[t1]
            if k0 and k1:
                continue  # interior edge
            if not k0 and not k1:
                continue  # buried inside a hole
            owner, gone = (t0, t1) if k0 else (t1, t0)
            en.append(pair_s[s])
            et.append(PERF)
            ep.append(removed_by[gone])
            eo.append(kept_to_new[owner])
        else:
            t = tri_s[s]
            if not kept[t]:
                raise GeometryError(
                    "perforation rasterization reaches the outer boundary"
                )
            n0, n1 = pair_s[s]
            en.append(pair_s[s])
            et.append(outer_tag(n0, n1))
            ep.append(0)
            eo.append(kept_to_new[t])

    return (
        np.array(en, dtype=np.int64).reshape(-1, 2),
        np.array(et, dtype=np.int64),
        np.array(ep, dtype=np.int64),
        np.array(eo, dtype=np.int64),
    )


@dataclass
class CoarseGrid:
    """Rectangular partition of the fine triangles into coarse blocks.

    Blocks fully swallowed by perforations are dropped; remaining blocks are
    renumbered 0..N_c-1 in row-major lattice order.  ``rc_to_block`` maps
    (row, col) to block id, -1 for dropped cells.
    """

    nx: int
    ny: int
    block_tris: list  # per block: np.ndarray of fine triangle ids
    block_of: np.ndarray  # (n_tri,) block id per fine triangle
    block_rc: np.ndarray  # (N_c, 2) (row, col) = (cj block, ci block)
    rc_to_block: np.ndarray  # (ny, nx) int
    block_area: np.ndarray  # (N_c,) in-domain area

    @property
    def n_blocks(self) -> int:
        return len(self.block_tris)

    def block_at(self, row: int, col: int) -> int:
        b = int(self.rc_to_block[row, col])
        if b < 0:
            raise EmptyBlock(f"coarse cell ({row},{col}) was dropped")
        return b


def build_coarse_grid(mesh: FineMesh, nx: int, ny: int) -> CoarseGrid:
    """Partition the fine triangles into an ``nx`` x ``ny`` block grid.

    Requires the fine cell counts to be divisible by the block counts so
    blocks are exact unions of fine cells.
    """
    if mesh.nfx % nx != 0 or mesh.nfy % ny != 0:
        raise NonNestedGrids(
            f"fine grid {mesh.nfx}x{mesh.nfy} not divisible by coarse {nx}x{ny}"
        )
    mx = mesh.nfx // nx
    my = mesh.nfy // ny
    col = mesh.tri_cell[:, 0] // mx
    row = mesh.tri_cell[:, 1] // my
    lin = row * nx + col

    rc_to_block = -np.ones((ny, nx), dtype=np.int64)
    occupied = np.unique(lin)
    rc_to_block[occupied // nx, occupied % nx] = np.arange(occupied.size)

    block_of = rc_to_block[row, col]
    order = np.argsort(block_of, kind="stable")
    bounds = np.searchsorted(block_of[order], np.arange(occupied.size + 1))
    block_tris = [order[bounds[k] : bounds[k + 1]] for k in range(occupied.size)]
    block_rc = np.column_stack([occupied // nx, occupied % nx])
    block_area = np.array([mesh.tri_area[t].sum() for t in block_tris])
    return CoarseGrid(
        nx=nx,
        ny=ny,
        block_tris=block_tris,
        block_of=block_of,
        block_rc=block_rc,
        rc_to_block=rc_to_block,
        block_area=block_area,
    )


@dataclass
class OversampleRegion:
    """A coarse block enlarged by ``layers`` rings of neighboring blocks.

    The member set is the Chebyshev ball of radius ``layers`` in block-index
    space, clipped at the grid edges, so the region is always a rectangle of
    coarse cells (minus dropped blocks).
    """

    center_block: int
    layers: int
    member_blocks: np.ndarray
    row0: int
    row1: int  # inclusive
    col0: int
    col1: int  # inclusive

    def bounds(self, mesh: FineMesh, grid: CoarseGrid):
        """Rectangle (xmin, xmax, ymin, ymax) covered by the region."""
        mx = mesh.nfx // grid.nx
        my = mesh.nfy // grid.ny
        xmin = mesh.geom.x0 + self.col0 * mx * mesh.h
        xmax = mesh.geom.x0 + (self.col1 + 1) * mx * mesh.h
        ymin = mesh.geom.y0 + self.row0 * my * mesh.h
        ymax = mesh.geom.y0 + (self.row1 + 1) * my * mesh.h
        return xmin, xmax, ymin, ymax


def oversample(grid: CoarseGrid, block: int, layers: int) -> OversampleRegion:
    """All blocks within Chebyshev distance ``layers`` of ``block``."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    r, c = grid.block_rc[block]
    row0 = max(0, int(r) - layers)
    row1 = min(grid.ny - 1, int(r) + layers)
    col0 = max(0, int(c) - layers)
    col1 = min(grid.nx - 1, int(c) + layers)
    window = grid.rc_to_block[row0 : row1 + 1, col0 : col1 + 1].ravel()
    members = np.sort(window[window >= 0])
    return OversampleRegion(
        center_block=block,
        layers=layers,
        member_blocks=members,
        row0=row0,
        row1=row1,
        col0=col0,
        col1=col1,
    )


@dataclass
class SegmentComponent:
    """One connected piece of perforation boundary inside one coarse block."""

    block: int
    local_index: int  # 1-based within the block
    perf_id: int
    edge_ids: np.ndarray
    length: float


@dataclass
class SegmentIndex:
    """Per-block connected components of perforation edges.

    A perforation straddling a block boundary contributes one component to
    each block it touches.  Component order within a block is deterministic:
    ascending (perforation id, smallest edge id).
    """

    components: list  # flat list of SegmentComponent
    by_block: list  # per block: list of indices into ``components``
    block_L: np.ndarray  # (N_c,) component count per block
    merged_length: np.ndarray  # (N_c,) total perforation length per block

    def block_components(self, block: int) -> list:
        return [self.components[k] for k in self.by_block[block]]


def index_perforation_segments(mesh: FineMesh, grid: CoarseGrid) -> SegmentIndex:
    """Group perforation edges into per-block connected components.

    An edge belongs to the block of its owning (kept) triangle; edges within
    a block are connected when they share a node.
    """
    perf_edges = mesh.edges_with_tag(PERF)
    edge_block = grid.block_of[mesh.edge_owner[perf_edges]]
    lengths = mesh.edge_length(perf_edges)

    by_block: list = [[] for _ in range(grid.n_blocks)]
    components: list = []
    order = np.argsort(edge_block, kind="stable")
    bounds = np.searchsorted(edge_block[order], np.arange(grid.n_blocks + 1))
    merged_length = np.zeros(grid.n_blocks)

    for b in range(grid.n_blocks):
        sel = order[bounds[b] : bounds[b + 1]]
        if sel.size == 0:
            continue
        eids = perf_edges[sel]
        merged_length[b] = lengths[sel].sum()
        comps = _connected_edge_groups(mesh.edge_nodes[eids])
        keyed = []
        for grp in comps:
            ids = eids[grp]
            keyed.append((int(mesh.edge_perf[ids[0]]), int(ids.min()), ids, grp))
        keyed.sort(key=lambda t: (t[0], t[1]))
        for lidx, (pid, _, ids, grp) in enumerate(keyed, start=1):
            comp = SegmentComponent(
                block=b,
                local_index=lidx,
                perf_id=pid,
                edge_ids=np.sort(ids),
                length=float(lengths[sel][grp].sum()),
            )
            by_block[b].append(len(components))
            components.append(comp)

    block_L = np.array([len(ks) for ks in by_block], dtype=np.int64)
    return SegmentIndex(
        components=components,
        by_block=by_block,
        block_L=block_L,
        merged_length=merged_length,
    )


def _connected_edge_groups(edge_nodes: np.ndarray) -> list:
    """Union-find over edges; edges sharing a node are in one group."""
    m = edge_nodes.shape[0]
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    node_seen: dict = {}
    for e in range(m):
        for n in edge_nodes[e]:
            n = int(n)
            if n in node_seen:
                ra, rb = find(node_seen[n]), find(e)
                if ra != rb:
                    parent[rb] = ra
            else:
                node_seen[n] = e
    groups: dict = {}
    for e in range(m):
        groups.setdefault(find(e), []).append(e)
    return [np.array(g, dtype=np.int64) for g in groups.values()]
