"""Multiscale basis construction by constrained energy minimization.

Each coarse block gets one background basis function plus one basis per
perforation continuum (type 2) or a single merged perforation basis
(type 1).  A basis is the minimizer of the stiffness energy over an
oversampled region, subject to prescribed mean values on every member
block and perforation segment (a Kronecker pattern centered on the owner
block), with zero Dirichlet data on the region boundary away from the
holes.  The constraints are enforced with Lagrange multipliers, so each
local problem is a sparse KKT saddle system factorized once per region
and reused for all continua of the block.

Averaging functionals are normalized (means, not integrals), which makes
coarse unknowns genuine cell / segment averages of the downscaled field.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    InvalidContinuum,
    RankDeficientConstraints,
    SaddleSolveFailure,
)
from .fem import (
    MaterialParams,
    elasticity_dof_map,
    elasticity_element_matrices,
    laplace_element_matrices,
    scalar_dof_map,
)
from .mesh import CoarseGrid, FineMesh, OversampleRegion, SegmentIndex, oversample

log = logging.getLogger(__name__)

CONSTRAINT_TOL = 1e-10


class DofLabel(NamedTuple):
    """Coarse unknown label: owner block, continuum, displacement direction.

    Continuum 0 is the background medium; m >= 1 are perforation segments
    (type 2: the block's m-th component, type 1: the merged segment).
    ``direction`` is '' for scalar problems, 'x' or 'y' for elasticity.
    """

    block: int
    continuum: int
    direction: str = ""


@dataclass
class BasisFunction:
    """One multiscale basis: owner block, continuum, fine-grid values.

    ``values`` spans all fine value dofs but is supported only inside the
    oversampled region the basis was solved on.
    """

    owner_block: int
    continuum: int
    layers: int
    values: np.ndarray
    direction: str = ""


@dataclass
class ProjectionMatrix:
    """Stack of basis vectors: rows are coarse dofs, columns fine dofs."""

    R: sp.csr_matrix
    labels: list
    basis_type: int
    layers: int
    is_vector: bool

    @property
    def n_rows(self) -> int:
        return self.R.shape[0]

    def row(self, idx: int) -> np.ndarray:
        return self.R.getrow(idx).toarray().ravel()

    def rows_for(self, direction: str = "", continuum=None) -> np.ndarray:
        """Row indices filtered by direction and/or continuum."""
        out = []
        for r, lab in enumerate(self.labels):
            if lab.direction != direction:
                continue
            if continuum is not None and lab.continuum != continuum:
                continue
            out.append(r)
        return np.array(out, dtype=np.int64)

    def save(self, path) -> None:
        lab = np.array(
            [(l.block, l.continuum, l.direction) for l in self.labels],
            dtype=[("block", "i8"), ("continuum", "i8"), ("direction", "U1")],
        )
        meta = {
            "basis_type": self.basis_type,
            "layers": self.layers,
            "is_vector": self.is_vector,
        }
        np.savez_compressed(
            path,
            data=self.R.data,
            indices=self.R.indices,
            indptr=self.R.indptr,
            shape=np.array(self.R.shape),
            labels=lab,
            meta=json.dumps(meta),
        )

    @staticmethod
    def load(path) -> "ProjectionMatrix":
        z = np.load(path, allow_pickle=False)
        R = sp.csr_matrix(
            (z["data"], z["indices"], z["indptr"]), shape=tuple(z["shape"])
        )
        meta = json.loads(str(z["meta"]))
        labels = [
            DofLabel(int(b), int(c), str(d)) for b, c, d in z["labels"]
        ]
        return ProjectionMatrix(
            R=R,
            labels=labels,
            basis_type=meta["basis_type"],
            layers=meta["layers"],
            is_vector=meta["is_vector"],
        )


class BasisWorkspace:
    """Shared precomputations for all local basis problems of one setup.

    Holds the averaging operators (cell means per block, trace means per
    segment component and per merged block segment) and the per-triangle
    element stiffness blocks, for either the scalar or the vector problem.
    """

    def __init__(
        self,
        mesh: FineMesh,
        grid: CoarseGrid,
        segments: SegmentIndex,
        params: MaterialParams | None = None,
        vector: bool = False,
        outer_mode: str = "roller",
    ):
        self.mesh = mesh
        self.grid = grid
        self.segments = segments
        self.params = params or MaterialParams()
        self.is_vector = vector
        self.outer_mode = outer_mode
        if vector:
            self.element_ke = elasticity_element_matrices(mesh, self.params)
            dof = elasticity_dof_map(mesh, mode=outer_mode)
        else:
            self.element_ke = laplace_element_matrices(mesh, self.params.k)
            dof = scalar_dof_map(mesh)
        # Dofs held at zero by the outer problem (Dirichlet sides and inactive
        # nodes).  Local solves inherit these, so bases stay conforming with
        # the global boundary conditions on any part of a region rim that
        # falls on the domain boundary.
        self.fixed_dof = np.ones(dof.full_size, dtype=bool)
        self.fixed_dof[dof.free] = False
        self.cell_avg = _cell_average_matrix(mesh, grid)
        self.seg_avg = _segment_average_matrix(mesh, segments)
        self.merged_avg = _merged_average_matrix(mesh, grid, segments)

    @property
    def n_value_dofs(self) -> int:
        return 2 * self.mesh.n_nodes if self.is_vector else self.mesh.n_nodes


def _cell_average_matrix(mesh: FineMesh, grid: CoarseGrid) -> sp.csr_matrix:
    """(N_c x n_nodes) rows: mean of a P1 field over each block."""
    rows, cols, vals = [], [], []
    for b, tris in enumerate(grid.block_tris):
        t = mesh.triangles[tris]
        w = np.repeat(mesh.tri_area[tris] / 3.0, 3) / grid.block_area[b]
        rows.append(np.full(t.size, b))
        cols.append(t.ravel())
        vals.append(w)
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_blocks, mesh.n_nodes),
    )
    return M.tocsr()


def _trace_row(mesh: FineMesh, edge_ids: np.ndarray):
    ln = mesh.edge_length(edge_ids)
    nodes = mesh.edge_nodes[edge_ids]
    cols = nodes.ravel()
    vals = np.repeat(ln / 2.0, 2) / ln.sum()
    return cols, vals


def _segment_average_matrix(mesh: FineMesh, segments: SegmentIndex) -> sp.csr_matrix:
    """(n_components x n_nodes) rows: mean of the trace over each segment."""
    rows, cols, vals = [], [], []
    for k, comp in enumerate(segments.components):
        c, v = _trace_row(mesh, comp.edge_ids)
        rows.append(np.full(c.size, k))
        cols.append(c)
        vals.append(v)
    if not rows:
        return sp.csr_matrix((0, mesh.n_nodes))
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(segments.components), mesh.n_nodes),
    )
    return M.tocsr()


def _merged_average_matrix(
    mesh: FineMesh, grid: CoarseGrid, segments: SegmentIndex
) -> sp.csr_matrix:
    """(N_c x n_nodes) rows: mean over all perforation edges of a block
    (zero row for blocks without perforations)."""
    rows, cols, vals = [], [], []
    for b in range(grid.n_blocks):
        comps = segments.block_components(b)
        if not comps:
            continue
        eids = np.concatenate([c.edge_ids for c in comps])
        c, v = _trace_row(mesh, eids)
        rows.append(np.full(c.size, b))
        cols.append(c)
        vals.append(v)
    if not rows:
        return sp.csr_matrix((grid.n_blocks, mesh.n_nodes))
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_blocks, mesh.n_nodes),
    )
    return M.tocsr()


def scalar_labels(ws: BasisWorkspace, basis_type: int) -> list:
    """Coarse dof labels in canonical order (block-major, continuum-minor)."""
    labels = []
    for b in range(ws.grid.n_blocks):
        labels.append(DofLabel(b, 0))
        L = int(ws.segments.block_L[b])
        if basis_type == 1:
            if L >= 1:
                labels.append(DofLabel(b, 1))
        elif basis_type == 2:
            for comp in ws.segments.block_components(b):
                labels.append(DofLabel(b, comp.local_index))
        else:
            raise ValueError(f"basis_type must be 1 or 2, got {basis_type}")
    return labels


def elasticity_labels(ws: BasisWorkspace, basis_type: int) -> list:
    base = scalar_labels(ws, basis_type)
    return [DofLabel(l.block, l.continuum, "x") for l in base] + [
        DofLabel(l.block, l.continuum, "y") for l in base
    ]


def averaging_operator(ws: BasisWorkspace, labels: list) -> sp.csr_matrix:
    """Rows of averaging functionals matching ``labels`` order.

    For label (i, 0): mean over block i.  For (i, m >= 1): trace mean over
    the corresponding segment (merged segment for type 1 labels, which use
    m == 1).  Elasticity labels act on the x or y dof block.
    """
    n = ws.mesh.n_nodes
    rows = []
    for lab in labels:
        if lab.continuum == 0:
            r = ws.cell_avg.getrow(lab.block)
        else:
            r = _segment_row(ws, lab.block, lab.continuum)
        if lab.direction == "":
            rows.append(r)
        elif lab.direction == "x":
            rows.append(sp.hstack([r, sp.csr_matrix((1, n))], format="csr"))
        else:
            rows.append(sp.hstack([sp.csr_matrix((1, n)), r], format="csr"))
    return sp.vstack(rows, format="csr")


def _segment_row(ws: BasisWorkspace, block: int, m: int) -> sp.csr_matrix:
    comps = ws.segments.block_components(block)
    for comp in comps:
        if comp.local_index == m:
            k = ws.segments.by_block[block][m - 1]
            return ws.seg_avg.getrow(k)
    raise InvalidContinuum(f"block {block} has no continuum {m}")


def type1_averaging_operator(ws: BasisWorkspace, labels: list) -> sp.csr_matrix:
    """As :func:`averaging_operator` but m == 1 rows use merged segments."""
    n = ws.mesh.n_nodes
    rows = []
    for lab in labels:
        if lab.continuum == 0:
            r = ws.cell_avg.getrow(lab.block)
        else:
            r = ws.merged_avg.getrow(lab.block)
        if lab.direction == "":
            rows.append(r)
        elif lab.direction == "x":
            rows.append(sp.hstack([r, sp.csr_matrix((1, n))], format="csr"))
        else:
            rows.append(sp.hstack([sp.csr_matrix((1, n)), r], format="csr"))
    return sp.vstack(rows, format="csr")


def label_averaging_operator(ws: BasisWorkspace, basis: ProjectionMatrix):
    """Averaging rows matching a built basis (dispatches on its type)."""
    if basis.basis_type == 1:
        return type1_averaging_operator(ws, basis.labels)
    return averaging_operator(ws, basis.labels)


@dataclass
class ConstraintSet:
    """Averaging constraints of one local basis problem.

    ``kinds`` holds row descriptors: ('cell', j), ('segment', j, l) or
    ('merged', j).  ``matrix`` has one row per constraint with coefficients
    over all fine value dofs; ``values`` is the prescribed Kronecker data.
    """

    kinds: list
    matrix: sp.csr_matrix
    values: np.ndarray


def region_constraint_rows(ws: BasisWorkspace, region: OversampleRegion, basis_type: int):
    """Constraint row descriptors and coefficient rows for a region.

    Rows are ordered cells first (ascending block id), then segment rows
    (block-major).
    """
    kinds = []
    rows = []
    for b in region.member_blocks:
        kinds.append(("cell", int(b)))
        rows.append(ws.cell_avg.getrow(int(b)))
    for b in region.member_blocks:
        b = int(b)
        if basis_type == 1:
            if ws.segments.block_L[b] >= 1:
                kinds.append(("merged", b))
                rows.append(ws.merged_avg.getrow(b))
        else:
            for comp in ws.segments.block_components(b):
                kinds.append(("segment", b, comp.local_index))
                k = ws.segments.by_block[b][comp.local_index - 1]
                rows.append(ws.seg_avg.getrow(k))
    C = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, ws.mesh.n_nodes))
    return kinds, C


def constraint_values(
    kinds: list, target_block: int, continuum: int, basis_type: int, block_L
) -> np.ndarray:
    """Kronecker right-hand side for basis (target_block, continuum)."""
    L = int(block_L[target_block])
    if basis_type == 1 and continuum > 1:
        raise InvalidContinuum("type 1 has continua 0 and 1 only")
    if basis_type == 2 and continuum > L:
        raise InvalidContinuum(
            f"block {target_block} has {L} perforation continua, got {continuum}"
        )
    if continuum >= 1 and L == 0:
        raise InvalidContinuum(f"block {target_block} has no perforations")
    delta = np.zeros(len(kinds))
    for r, kind in enumerate(kinds):
        if kind[0] == "cell":
            delta[r] = 1.0 if (kind[1] == target_block and continuum == 0) else 0.0
        elif kind[0] == "merged":
            delta[r] = 1.0 if (kind[1] == target_block and continuum == 1) else 0.0
        else:
            _, j, l = kind
            delta[r] = 1.0 if (j == target_block and l == continuum) else 0.0
    return delta


def build_constraints(
    ws: BasisWorkspace,
    region: OversampleRegion,
    target_block: int,
    continuum: int,
    basis_type: int,
) -> ConstraintSet:
    """Full constraint set of one scalar basis function."""
    kinds, C = region_constraint_rows(ws, region, basis_type)
    delta = constraint_values(
        kinds, target_block, continuum, basis_type, ws.segments.block_L
    )
    return ConstraintSet(kinds=kinds, matrix=C, values=delta)


def solve_constrained(A, C, delta: np.ndarray, tol: float = CONSTRAINT_TOL):
    """Minimize ``0.5 u^T A u`` subject to ``C u = delta`` via the KKT system.

    Returns (u, multipliers).  Raises RankDeficientConstraints when the
    saddle matrix is singular and SaddleSolveFailure when the constraint
    residual exceeds ``tol``.
    """
    n = A.shape[0]
    m = C.shape[0]
    if C.shape[1] != n or delta.shape != (m,):
        raise DimensionMismatch("constraint dimensions do not match operator")
    K = sp.bmat([[A, C.T], [C, None]], format="csc")
    rhs = np.concatenate([np.zeros(n), delta])
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise RankDeficientConstraints(str(exc)) from exc
    x = lu.solve(rhs)
    u, lam = x[:n], x[n:]
    res = np.abs(C @ u - delta).max() if m else 0.0
    if not np.isfinite(res) or res > tol:
        raise SaddleSolveFailure(res)
    return u, lam


class _RegionProblem:
    """Local KKT system of one oversampled region, factorized once."""

    def __init__(self, ws: BasisWorkspace, region: OversampleRegion, basis_type: int):
        mesh, grid = ws.mesh, ws.grid
        self.region = region
        tri_ids = np.concatenate(
            [grid.block_tris[int(b)] for b in region.member_blocks]
        )
        tris = mesh.triangles[tri_ids]
        self.nodes = np.unique(tris)
        loc = np.searchsorted(self.nodes, tris)
        nloc = self.nodes.size

        mx = mesh.nfx // grid.nx
        my = mesh.nfy // grid.ny
        gi = self.nodes % (mesh.nfx + 1)
        gj = self.nodes // (mesh.nfx + 1)
        # Artificial zero-Dirichlet walls: only the region box sides that cut
        # through the domain interior.  Sides falling on the domain boundary
        # keep the outer problem's condition (via ws.fixed_dof below).
        on_rim = np.zeros(self.nodes.size, dtype=bool)
        if region.col0 > 0:
            on_rim |= gi == region.col0 * mx
        if region.col1 + 1 < grid.nx:
            on_rim |= gi == (region.col1 + 1) * mx
        if region.row0 > 0:
            on_rim |= gj == region.row0 * my
        if region.row1 + 1 < grid.ny:
            on_rim |= gj == (region.row1 + 1) * my
        KE = ws.element_ke[tri_ids]
        if ws.is_vector:
            fx = ~on_rim & ~ws.fixed_dof[self.nodes]
            fy = ~on_rim & ~ws.fixed_dof[mesh.n_nodes + self.nodes]
            self.free = (fx, fy)
            self.free_nodes = (self.nodes[fx], self.nodes[fy])
            dofs = np.concatenate([loc, loc + nloc], axis=1)
            ndl = 2 * nloc
            free_mask = np.concatenate([fx, fy])
        else:
            self.free = ~on_rim & ~ws.fixed_dof[self.nodes]
            self.free_nodes = self.nodes[self.free]
            dofs = loc
            ndl = nloc
            free_mask = self.free
        m = dofs.shape[1]
        rows = np.repeat(dofs, m, axis=1).ravel()
        cols = np.tile(dofs, (1, m)).ravel()
        A = sp.coo_matrix((KE.ravel(), (rows, cols)), shape=(ndl, ndl)).tocsr()
        ff = np.flatnonzero(free_mask)
        self.A_ff = A[ff][:, ff]

        kinds, C = region_constraint_rows(ws, region, basis_type)
        if ws.is_vector:
            fnx, fny = self.free_nodes
            Cf = sp.block_diag([C[:, fnx], C[:, fny]], format="csr")
            kinds = [("x",) + k for k in kinds] + [("y",) + k for k in kinds]
        else:
            Cf = C[:, self.free_nodes]
        nz = np.diff(Cf.indptr) > 0
        if not nz.all():
            dropped = [kinds[r] for r in np.flatnonzero(~nz)]
            log.warning("dropping clamped constraint rows: %s", dropped)
            Cf = Cf[np.flatnonzero(nz)]
            kinds = [k for k, keep in zip(kinds, nz) if keep]
        self.kinds = kinds
        self.C = Cf.tocsr()
        try:
            self.lu = spla.splu(self._saddle())
        except RuntimeError:
            self._prune_dependent_rows()
            try:
                self.lu = spla.splu(self._saddle())
            except RuntimeError as exc:
                raise RankDeficientConstraints(
                    f"region of block {region.center_block}: {exc}"
                ) from exc
        self.n_free = self.A_ff.shape[0]

    def _saddle(self) -> sp.csc_matrix:
        return sp.bmat([[self.A_ff, self.C.T], [self.C, None]], format="csc")

    def _prune_dependent_rows(self) -> None:
        """Drop constraint rows that became linearly dependent after clamping.

        Rim clamping can reduce two trace rows of one perforation to the same
        surviving junction node, which makes the saddle matrix singular.  A
        rank-revealing Cholesky of the constraint Gram matrix identifies a
        maximal independent subset; the pruned rows stay satisfied through
        the rows that remain (the post-solve residual check still covers
        every kept row).
        """
        from scipy.linalg.lapack import dpstrf

        G = (self.C @ self.C.T).toarray()
        _, piv, rank, _ = dpstrf(G, lower=1)
        if rank == G.shape[0]:
            return
        drop = np.sort(piv[rank:] - 1)
        log.warning(
            "pruning dependent constraint rows: %s",
            [self.kinds[int(r)] for r in drop],
        )
        keep = np.setdiff1d(np.arange(len(self.kinds)), drop)
        self.C = self.C[keep]
        self.kinds = [self.kinds[int(r)] for r in keep]

    def solve(self, delta: np.ndarray) -> np.ndarray:
        """Free-dof values of the minimizer for one Kronecker datum."""
        if np.count_nonzero(delta) == 0:
            raise RankDeficientConstraints("target constraint row was dropped")
        rhs = np.concatenate([np.zeros(self.n_free), delta])
        x = self.lu.solve(rhs)
        psi = x[: self.n_free]
        res = np.abs(self.C @ psi - delta).max()
        if not np.isfinite(res) or res > CONSTRAINT_TOL:
            raise SaddleSolveFailure(
                res, detail=f"(block {self.region.center_block})"
            )
        return psi

    def delta_for(self, ws, target_block: int, continuum: int, basis_type: int):
        delta = np.zeros(len(self.kinds))
        scalar_kinds = (
            [k[1:] for k in self.kinds] if ws.is_vector else self.kinds
        )
        for r, kind in enumerate(scalar_kinds):
            if kind[0] == "cell":
                hit = kind[1] == target_block and continuum == 0
            elif kind[0] == "merged":
                hit = kind[1] == target_block and continuum == 1
            else:
                hit = kind[1] == target_block and kind[2] == continuum
            if hit:
                delta[r] = 1.0
        return delta


def solve_local_basis(ws: BasisWorkspace, region, target_block, continuum, basis_type):
    """One scalar basis function as a full fine-grid vector."""
    if ws.is_vector:
        raise ValueError("use build_basis_elasticity for vector bases")
    L = int(ws.segments.block_L[target_block])
    if continuum >= 1 and L == 0:
        raise InvalidContinuum(f"block {target_block} has no perforations")
    if basis_type == 1 and continuum > 1:
        raise InvalidContinuum("type 1 has continua 0 and 1 only")
    if basis_type == 2 and continuum > L:
        raise InvalidContinuum(
            f"block {target_block} has {L} perforation continua, got {continuum}"
        )
    prob = _RegionProblem(ws, region, basis_type)
    delta = prob.delta_for(ws, target_block, continuum, basis_type)
    psi_free = prob.solve(delta)
    psi = np.zeros(ws.mesh.n_nodes)
    psi[prob.free_nodes] = psi_free
    return BasisFunction(
        owner_block=target_block,
        continuum=continuum,
        layers=region.layers,
        values=psi,
    )


def _block_continua(ws: BasisWorkspace, block: int, basis_type: int) -> list:
    out = [0]
    if basis_type == 1:
        if ws.segments.block_L[block] >= 1:
            out.append(1)
    else:
        for comp in ws.segments.block_components(block):
            out.append(comp.local_index)
    return out


def _solve_block(ws, block, s, basis_type):
    """All basis vectors of one block: (continua, free_nodes, columns)."""
    region = oversample(ws.grid, block, s)
    prob = _RegionProblem(ws, region, basis_type)
    continua = _block_continua(ws, block, basis_type)
    sols = []
    for m in continua:
        delta = prob.delta_for(ws, block, m, basis_type)
        if ws.is_vector:
            isx = np.array([k[0] == "x" for k in prob.kinds])
            dx = np.where(isx, delta, 0.0)
            dy = np.where(isx, 0.0, delta)
            sols.append((prob.solve(dx), prob.solve(dy)))
        else:
            sols.append(prob.solve(delta))
    return continua, prob.free_nodes, sols


_PAR_WS = None


def _par_init(ws, s, basis_type):
    global _PAR_WS
    _PAR_WS = (ws, s, basis_type)


def _par_block(block):
    ws, s, basis_type = _PAR_WS
    return _solve_block(ws, block, s, basis_type)


def _all_block_solutions(ws, s, basis_type, n_jobs):
    blocks = range(ws.grid.n_blocks)
    if n_jobs is None or n_jobs <= 1:
        return [_solve_block(ws, b, s, basis_type) for b in blocks]
    import multiprocessing
    from concurrent.futures import ProcessPoolExecutor

    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(
        max_workers=n_jobs,
        mp_context=ctx,
        initializer=_par_init,
        initargs=(ws, s, basis_type),
    ) as ex:
        return list(ex.map(_par_block, blocks, chunksize=16))


def build_basis_scalar(
    mesh: FineMesh,
    grid: CoarseGrid,
    segments: SegmentIndex,
    s: int,
    basis_type: int,
    params: MaterialParams | None = None,
    n_jobs: int = 1,
    workspace: BasisWorkspace | None = None,
) -> ProjectionMatrix:
    """Build the scalar projection matrix for oversampling width ``s``."""
    ws = workspace or BasisWorkspace(mesh, grid, segments, params, vector=False)
    results = _all_block_solutions(ws, s, basis_type, n_jobs)
    labels, rows, cols, vals = [], [], [], []
    for block, (continua, free_nodes, sols) in enumerate(results):
        for m, psi in zip(continua, sols):
            r = len(labels)
            labels.append(DofLabel(block, m))
            nz = psi != 0.0
            rows.append(np.full(int(nz.sum()), r))
            cols.append(free_nodes[nz])
            vals.append(psi[nz])
    R = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(labels), mesh.n_nodes),
    ).tocsr()
    return ProjectionMatrix(
        R=R, labels=labels, basis_type=basis_type, layers=s, is_vector=False
    )


def build_basis_elasticity(
    mesh: FineMesh,
    grid: CoarseGrid,
    segments: SegmentIndex,
    s: int,
    basis_type: int,
    params: MaterialParams | None = None,
    n_jobs: int = 1,
    workspace: BasisWorkspace | None = None,
    outer_mode: str = "roller",
) -> ProjectionMatrix:
    """Vector projection matrix: all X-direction rows, then all Y rows."""
    ws = workspace or BasisWorkspace(
        mesh, grid, segments, params, vector=True, outer_mode=outer_mode
    )
    results = _all_block_solutions(ws, s, basis_type, n_jobs)
    N = mesh.n_nodes
    x_entries, y_entries = [], []
    x_labels, y_labels = [], []
    for block, (continua, free_nodes, sols) in enumerate(results):
        fnx, fny = free_nodes
        for m, (psi_x, psi_y) in zip(continua, sols):
            for store, labs, psi, tag in (
                (x_entries, x_labels, psi_x, "x"),
                (y_entries, y_labels, psi_y, "y"),
            ):
                r = len(labs)
                labs.append(DofLabel(block, m, tag))
                ux, uy = psi[: fnx.size], psi[fnx.size :]
                store.append((r, fnx, ux, fny, uy))
    labels = x_labels + y_labels
    rows, cols, vals = [], [], []
    for off, entries in ((0, x_entries), (len(x_labels), y_entries)):
        for r, fnx, ux, fny, uy in entries:
            for comp, nodes_c, shift in ((ux, fnx, 0), (uy, fny, N)):
                nz = comp != 0.0
                rows.append(np.full(int(nz.sum()), off + r))
                cols.append(nodes_c[nz] + shift)
                vals.append(comp[nz])
    R = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(labels), 2 * N),
    ).tocsr()
    return ProjectionMatrix(
        R=R, labels=labels, basis_type=basis_type, layers=s, is_vector=True
    )


def basis_decay_profile(
    psi: np.ndarray, mesh: FineMesh, grid: CoarseGrid, center_block: int
) -> np.ndarray:
    """Fraction of the basis l2 mass per coarse layer distance.

    Nodes are attributed to the smallest Chebyshev block distance among the
    blocks containing them; the result sums to 1.
    """
    values = psi if psi.size == mesh.n_nodes else psi[: mesh.n_nodes]
    r0, c0 = grid.block_rc[center_block]
    dist = np.full(mesh.n_nodes, np.iinfo(np.int64).max, dtype=np.int64)
    for b, tris in enumerate(grid.block_tris):
        r, c = grid.block_rc[b]
        d = max(abs(int(r) - int(r0)), abs(int(c) - int(c0)))
        nodes = np.unique(mesh.triangles[tris])
        dist[nodes] = np.minimum(dist[nodes], d)
    total = float(values**2 @ (dist < np.iinfo(np.int64).max))
    if total == 0.0:
        return np.zeros(1)
    dmax = int(dist[dist < np.iinfo(np.int64).max].max())
    out = np.zeros(dmax + 1)
    for d in range(dmax + 1):
        sel = dist == d
        out[d] = float((values[sel] ** 2).sum()) / total
    return out


def continuum_measures(
    grid: CoarseGrid, segments: SegmentIndex, labels: list
) -> np.ndarray:
    """|V| per coarse dof for type-2 labels: block in-domain area for
    m = 0, the component's segment length otherwise."""
    out = np.empty(len(labels))
    for r, lab in enumerate(labels):
        if lab.continuum == 0:
            out[r] = grid.block_area[lab.block]
        else:
            comps = segments.block_components(lab.block)
            match = [c for c in comps if c.local_index == lab.continuum]
            out[r] = match[0].length if match else 0.0
    return out


def type1_continuum_measures(
    grid: CoarseGrid, segments: SegmentIndex, labels: list
) -> np.ndarray:
    out = np.empty(len(labels))
    for r, lab in enumerate(labels):
        if lab.continuum == 0:
            out[r] = grid.block_area[lab.block]
        else:
            out[r] = segments.merged_length[lab.block]
    return out


def measures_for(basis: ProjectionMatrix, grid: CoarseGrid, segments: SegmentIndex):
    if basis.basis_type == 1:
        return type1_continuum_measures(grid, segments, basis.labels)
    return continuum_measures(grid, segments, basis.labels)
