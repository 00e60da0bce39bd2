"""P1 finite-element assembly and solves on the fine mesh.

Covers the scalar diffusion operator, plane-strain linear elasticity, the
consistent mass matrix, Neumann/Robin data on perforation boundaries, and
implicit-Euler time stepping.  All element integrals are closed-form (the
integrands are polynomial), so there is no quadrature error.

Scalar systems are assembled over the full lattice node set; vector systems
use block dof ordering (all x-displacements, then all y-displacements).
Dirichlet elimination is a separate reduction step via :class:`DofMap`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateTriangle, DimensionMismatch, NotConverged, SingularSystem
from .mesh import DIRICHLET, PERF, FineMesh


@dataclass(frozen=True)
class MaterialParams:
    """Coefficients of the model problems.

    Lame parameters are derived from (E, nu).  ``alpha`` is the Robin
    exchange coefficient; ``tau``/``n_steps`` configure implicit time
    stepping when a problem is transient.
    """

    k: float = 1.0
    c: float = 1.0
    E: float = 1.0
    nu: float = 0.3
    alpha: float = 0.0
    tau: float | None = None
    n_steps: int | None = None

    def __post_init__(self):
        if self.k <= 0 or self.c <= 0:
            raise ValueError("k and c must be positive")
        if not 0.0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")

    @property
    def lame_mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lame_lambda(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


def _tri_geometry(mesh: FineMesh):
    """Areas and P1 shape-function gradients, with orientation check."""
    xy = mesh.node_xy[mesh.triangles]  # (T,3,2)
    d1 = xy[:, 1] - xy[:, 0]
    d2 = xy[:, 2] - xy[:, 0]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(area2 <= 0):
        raise DegenerateTriangle("triangle with non-positive area")
    area = 0.5 * area2
    # grad lambda_i = (y_j - y_k, x_k - x_j) / (2 A), (i,j,k) cyclic
    g = np.empty((xy.shape[0], 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = xy[:, j, 1] - xy[:, k, 1]
        g[:, i, 1] = xy[:, k, 0] - xy[:, j, 0]
    g /= area2[:, None, None]
    return area, g


def _per_triangle(value, n_tri: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n_tri, float(arr))
    if arr.shape != (n_tri,):
        raise DimensionMismatch(f"expected scalar or ({n_tri},) field")
    return arr


def laplace_element_matrices(mesh: FineMesh, k=1.0) -> np.ndarray:
    """(T,3,3) element stiffness blocks for the scalar operator."""
    area, g = _tri_geometry(mesh)
    kt = _per_triangle(k, mesh.n_triangles)
    return (kt * area)[:, None, None] * np.einsum("tid,tjd->tij", g, g)


def elasticity_element_matrices(mesh: FineMesh, params: MaterialParams) -> np.ndarray:
    """(T,6,6) element stiffness blocks, dof order (u1,u2,u3,v1,v2,v3)."""
    area, g = _tri_geometry(mesh)
    lam, mu = params.lame_lambda, params.lame_mu
    T = mesh.n_triangles
    B = np.zeros((T, 3, 6))
    B[:, 0, 0:3] = g[:, :, 0]
    B[:, 1, 3:6] = g[:, :, 1]
    B[:, 2, 0:3] = g[:, :, 1]
    B[:, 2, 3:6] = g[:, :, 0]
    D = np.array(
        [[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]]
    )
    KE = area[:, None, None] * np.einsum("tka,kl,tlb->tab", B, D, B)
    return 0.5 * (KE + KE.transpose(0, 2, 1))


def _scatter(mesh: FineMesh, KE: np.ndarray, dofs: np.ndarray, n_dof: int):
    """Accumulate (T,m,m) element blocks into a global CSR matrix."""
    m = KE.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    A = sp.coo_matrix((KE.ravel(), (rows, cols)), shape=(n_dof, n_dof)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def assemble_stiffness_laplace(mesh: FineMesh, params: MaterialParams | None = None, k=None):
    """Scalar stiffness over all lattice nodes (symmetric PSD)."""
    if k is None:
        k = params.k if params is not None else 1.0
    KE = laplace_element_matrices(mesh, k)
    return _scatter(mesh, KE, mesh.triangles, mesh.n_nodes)


def assemble_stiffness_elasticity(mesh: FineMesh, params: MaterialParams):
    """Vector stiffness of size 2 x n_nodes (x block then y block)."""
    KE = elasticity_element_matrices(mesh, params)
    N = mesh.n_nodes
    dofs = np.concatenate([mesh.triangles, mesh.triangles + N], axis=1)
    return _scatter(mesh, KE, dofs, 2 * N)


def assemble_mass(mesh: FineMesh, params: MaterialParams | None = None, c=None):
    """Consistent P1 mass matrix; total mass equals c * in-domain area."""
    if c is None:
        c = params.c if params is not None else 1.0
    area, _ = _tri_geometry(mesh)
    ct = _per_triangle(c, mesh.n_triangles)
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    ME = (ct * area)[:, None, None] * base
    return _scatter(mesh, ME, mesh.triangles, mesh.n_nodes)


def assemble_load(mesh: FineMesh, f=0.0, g=0.0) -> np.ndarray:
    """Scalar load: volume source ``f`` plus perforation flux ``g``.

    ``f`` is per-triangle (or constant), ``g`` per perforation edge (or
    constant).
    """
    b = np.zeros(mesh.n_nodes)
    ft = _per_triangle(f, mesh.n_triangles)
    w = ft * mesh.tri_area / 3.0
    np.add.at(b, mesh.triangles.ravel(), np.repeat(w, 3))
    perf = mesh.edges_with_tag(PERF)
    if perf.size:
        ge = np.asarray(g, dtype=float)
        ge = np.full(perf.size, float(ge)) if ge.ndim == 0 else ge[perf]
        w = ge * mesh.edge_length(perf) / 2.0
        np.add.at(b, mesh.edge_nodes[perf].ravel(), np.repeat(w, 2))
    return b


def assemble_load_elasticity(mesh: FineMesh, f=(0.0, 0.0), g=(0.0, 0.0)) -> np.ndarray:
    """Vector load: body force ``f`` and perforation traction ``g``, both
    constant (fx, fy) pairs."""
    N = mesh.n_nodes
    b = np.concatenate(
        [assemble_load(mesh, f[0], g[0]), assemble_load(mesh, f[1], g[1])]
    )
    assert b.shape == (2 * N,)
    return b


def assemble_robin_boundary(mesh: FineMesh, alpha: float, g=0.0):
    """Boundary mass ``alpha * edge-mass`` on perforation edges and the
    matching right-hand side ``int alpha g phi ds``."""
    N = mesh.n_nodes
    rhs = np.zeros(N)
    perf = mesh.edges_with_tag(PERF)
    if alpha == 0.0 or perf.size == 0:
        return sp.csr_matrix((N, N)), rhs
    ge = np.asarray(g, dtype=float)
    ge = np.full(perf.size, float(ge)) if ge.ndim == 0 else ge[perf]
    ln = mesh.edge_length(perf)
    nodes = mesh.edge_nodes[perf]
    base = alpha * ln / 6.0
    rows = nodes[:, [0, 0, 1, 1]].ravel()
    cols = nodes[:, [0, 1, 0, 1]].ravel()
    vals = np.column_stack([2 * base, base, base, 2 * base]).ravel()
    B = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    np.add.at(rhs, nodes.ravel(), np.repeat(alpha * ge * ln / 2.0, 2))
    return B, rhs


class DofMap:
    """Mapping between the full dof space and the free (non-Dirichlet) dofs."""

    def __init__(self, full_size: int, free: np.ndarray):
        self.full_size = full_size
        self.free = np.asarray(free, dtype=np.int64)

    @property
    def n_free(self) -> int:
        return self.free.size

    def reduce_matrix(self, A):
        return A.tocsr()[self.free][:, self.free]

    def reduce_vector(self, b: np.ndarray) -> np.ndarray:
        return np.asarray(b)[self.free]

    def expand(self, u_red: np.ndarray) -> np.ndarray:
        u = np.zeros(self.full_size)
        u[self.free] = u_red
        return u


def scalar_dof_map(mesh: FineMesh) -> DofMap:
    """Active lattice nodes minus Dirichlet-tagged boundary nodes."""
    free = mesh.active_nodes & ~mesh.dirichlet_node_mask()
    return DofMap(mesh.n_nodes, np.flatnonzero(free))


def elasticity_dof_map(mesh: FineMesh, mode: str = "roller") -> DofMap:
    """Free dofs for the vector problem.

    ``roller``: a Dirichlet edge on a vertical side fixes the x component of
    its nodes, a horizontal side fixes the y component (symmetry condition).
    ``clamp``: Dirichlet edges fix both components.
    """
    N = mesh.n_nodes
    active = mesh.active_nodes
    fixed = np.zeros(2 * N, dtype=bool)
    d = mesh.edge_tag == DIRICHLET
    nodes = mesh.edge_nodes[d]
    if mode == "clamp":
        fixed[nodes.ravel()] = True
        fixed[N + nodes.ravel()] = True
    elif mode == "roller":
        p0 = mesh.node_xy[nodes[:, 0]]
        p1 = mesh.node_xy[nodes[:, 1]]
        vertical = p0[:, 0] == p1[:, 0]
        fixed[nodes[vertical].ravel()] = True
        fixed[N + nodes[~vertical].ravel()] = True
    else:
        raise ValueError(f"unknown Dirichlet mode {mode!r}")
    free = np.concatenate([active, active]) & ~fixed
    return DofMap(2 * N, np.flatnonzero(free))


def apply_dirichlet(A, b: np.ndarray, dof_map: DofMap):
    """Eliminate Dirichlet rows/columns (homogeneous data)."""
    return dof_map.reduce_matrix(A), dof_map.reduce_vector(b)


def solve_spd(A, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Direct sparse solve with a post-hoc residual check.

    Falls back to conjugate gradients if the factorization result misses the
    tolerance.  Raises SingularSystem / NotConverged accordingly.
    """
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({n},)")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    try:
        lu = spla.splu(sp.csc_matrix(A))
        x = lu.solve(b)
    except RuntimeError as exc:
        if "singular" in str(exc).lower():
            raise SingularSystem(str(exc)) from exc
        raise
    if not np.isfinite(x).all():
        raise SingularSystem("factorization produced non-finite values")
    res = np.linalg.norm(A @ x - b) / bnorm
    if res <= tol:
        return x
    x0 = x
    x, info = spla.cg(sp.csr_matrix(A), b, x0=x0, rtol=tol, maxiter=10 * n)
    res = np.linalg.norm(A @ x - b) / bnorm
    if info != 0 or res > tol:
        # a direct solution at inverse-roundoff scale that still misses the
        # residual is a numerically singular matrix, not slow convergence
        proxy = np.abs(x0).max() * np.finfo(float).eps * np.abs(A.data).max()
        if proxy > 1e-3 * bnorm:
            raise SingularSystem(
                f"solve failed with residual {res:.2e}; the matrix appears "
                "numerically singular"
            )
        raise NotConverged(res, max_iters=10 * n)
    return x


@dataclass
class MarchResult:
    """Implicit-Euler history: stored steps, times and state vectors."""

    steps: list
    times: list
    states: list

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def fine_time_march(
    S,
    A,
    b: np.ndarray,
    u0: np.ndarray,
    tau: float,
    n_steps: int,
    B=None,
    snapshots=None,
) -> MarchResult:
    """March ``(S/tau + A + B) u^{n+1} = b + S u^n / tau``.

    ``snapshots`` is an iterable of 1-based step indices to store (default:
    every step).  The system matrix is factorized once.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = S.shape[0]
    if u0.shape != (n,):
        raise DimensionMismatch("u0 size mismatch")
    M = (S / tau + A + (B if B is not None else 0.0)).tocsc()
    lu = spla.splu(M)
    keep = set(range(1, n_steps + 1)) if snapshots is None else set(snapshots)
    out = MarchResult(steps=[], times=[], states=[])
    u = u0.copy()
    for step in range(1, n_steps + 1):
        u = lu.solve(b + S @ u / tau)
        if step in keep:
            out.steps.append(step)
            out.times.append(step * tau)
            out.states.append(u.copy())
    return out


def write_triplets(path, A, labels=None) -> None:
    """Plain-text (row, col, value) dump for debugging/regression diffs."""
    A = sp.coo_matrix(A)
    with open(path, "w") as fp:
        fp.write(f"# {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        if labels is not None:
            for i, lab in enumerate(labels):
                fp.write(f"# row {i} {lab}\n")
        order = np.lexsort((A.col, A.row))
        for r, c, v in zip(A.row[order], A.col[order], A.data[order]):
            fp.write(f"{r} {c} {v:.17g}\n")
