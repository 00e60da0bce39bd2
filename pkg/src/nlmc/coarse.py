"""Assembly and solution of the upscaled coarse systems.

The steady coarse model is the Galerkin triple product T = R A R^T with
load q = R b.  The time-dependent model replaces the diagonal of T so that
every row sums to zero (a finite-volume style correction that makes the
scheme conserve mass and preserve constants), uses a lumped diagonal mass
c_m |V_i| and a lumped load f |K_i| on background rows, g |gamma| on
perforation rows.  Robin exchange on perforation boundaries adds a
diagonal alpha |gamma| term with matching right-hand side.

Time stepping is implicit Euler; the 1/tau factor is applied in the
stepper, the stored mass matrix carries only c_m |V_i|.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import ProjectionMatrix
from .errors import DimensionMismatch
from .fem import MarchResult

ROWSUM_TOL = 1e-10


@dataclass
class UpscaledSystem:
    """Coarse operator bundle.

    ``T`` is the coarse stiffness, ``M`` the diagonal mass (None for
    steady problems), ``C`` the diagonal Robin matrix (None when absent),
    ``rhs`` the coarse load.  ``labels`` mirror the projection matrix rows;
    ``measures`` are |K_i| / |gamma| per row.  ``variant`` is one of
    'steady', 'parabolic', 'robin'.
    """

    T: sp.csr_matrix
    rhs: np.ndarray
    labels: list
    measures: np.ndarray
    variant: str = "steady"
    M: sp.dia_matrix | None = None
    C: sp.dia_matrix | None = None

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def operator(self, tau: float | None = None) -> sp.csr_matrix:
        """System matrix of one implicit step (or of the steady problem)."""
        K = self.T
        if self.C is not None:
            K = K + self.C
        if tau is not None:
            if self.M is None:
                raise DimensionMismatch("no mass matrix on a steady system")
            K = K + self.M / tau
        return K.tocsr()


def _symmetrize(T: sp.spmatrix) -> sp.csr_matrix:
    return (0.5 * (T + T.T)).tocsr()


def assemble_steady(basis: ProjectionMatrix, A: sp.spmatrix, b: np.ndarray) -> UpscaledSystem:
    """Coarse steady system T = R A R^T, q = R b."""
    R = basis.R
    if A.shape[0] != R.shape[1] or b.shape[0] != R.shape[1]:
        raise DimensionMismatch(
            f"fine operator size {A.shape[0]} does not match basis columns {R.shape[1]}"
        )
    T = _symmetrize(R @ A @ R.T)
    rhs = R @ b
    return UpscaledSystem(
        T=T,
        rhs=rhs,
        labels=list(basis.labels),
        measures=np.array([]),
        variant="steady",
    )


def zero_row_sum(T: sp.csr_matrix) -> sp.csr_matrix:
    """Replace the diagonal so every row sums to zero."""
    s = np.asarray(T.sum(axis=1)).ravel()
    Tc = (T - sp.diags(s)).tocsr()
    check = np.abs(np.asarray(Tc.sum(axis=1)).ravel()).max()
    scale = np.abs(Tc.data).max() if Tc.nnz else 1.0
    if check > ROWSUM_TOL * max(scale, 1.0):
        raise ArithmeticError(f"row-sum correction failed, residual {check:.3e}")
    return Tc


def lumped_load(labels: list, measures: np.ndarray, f: float, g: float) -> np.ndarray:
    """f |K_i| on background rows, g |gamma| on perforation rows."""
    rhs = np.empty(len(labels))
    for r, lab in enumerate(labels):
        rhs[r] = (f if lab.continuum == 0 else g) * measures[r]
    return rhs


def assemble_parabolic(
    basis: ProjectionMatrix,
    A: sp.spmatrix,
    measures: np.ndarray,
    c: float = 1.0,
    f: float = 0.0,
    g: float = 0.0,
    c_perf: float = 0.0,
) -> UpscaledSystem:
    """Coarse time-dependent system: lumped mass, corrected stiffness.

    ``c`` is the background storage coefficient.  Perforation rows carry no
    volume, so their storage defaults to zero; ``c_perf`` adds an interface
    capacity per unit boundary length when a model wants one.  ``f`` is the
    volumetric source, ``g`` the influx density on perforation boundaries.
    """
    steady = assemble_steady(basis, A, np.zeros(A.shape[0]))
    if measures.shape[0] != steady.n:
        raise DimensionMismatch("measure vector does not match coarse size")
    coeff = np.array(
        [c if lab.continuum == 0 else c_perf for lab in basis.labels]
    )
    M = sp.diags(coeff * measures)
    T = zero_row_sum(steady.T)
    rhs = lumped_load(basis.labels, measures, f, g)
    return UpscaledSystem(
        T=T,
        rhs=rhs,
        labels=steady.labels,
        measures=measures,
        variant="parabolic",
        M=M,
    )


def assemble_robin(
    system: UpscaledSystem, alpha: float, g: float
) -> UpscaledSystem:
    """Add diagonal Robin exchange alpha (u - g) on perforation rows."""
    diag = np.array(
        [
            alpha * mv if lab.continuum >= 1 else 0.0
            for lab, mv in zip(system.labels, system.measures)
        ]
    )
    C = sp.diags(diag)
    rhs = system.rhs + g * diag
    return replace(system, C=C, rhs=rhs, variant="robin")


def solve_steady(system: UpscaledSystem) -> np.ndarray:
    """Direct solve of (T [+ C]) u = rhs."""
    K = system.operator().tocsc()
    lu = spla.splu(K)
    return lu.solve(system.rhs)


def coarse_time_march(
    system: UpscaledSystem,
    u0: np.ndarray,
    tau: float,
    n_steps: int,
    snapshots=None,
) -> MarchResult:
    """Implicit Euler on the coarse system.

    Solves (M/tau + T + C) u_new = rhs + M u_old / tau each step.  Stores
    the state at the 1-based steps in ``snapshots`` (all steps if None).
    """
    if system.M is None:
        raise DimensionMismatch("time march needs a parabolic or robin system")
    if u0.shape[0] != system.n:
        raise DimensionMismatch("initial state size mismatch")
    keep = set(range(1, n_steps + 1)) if snapshots is None else set(snapshots)
    lu = spla.splu(system.operator(tau).tocsc())
    Mdt = system.M / tau
    u = u0.copy()
    steps, times, states = [], [], []
    for n in range(1, n_steps + 1):
        u = lu.solve(system.rhs + Mdt @ u)
        if n in keep:
            steps.append(n)
            times.append(n * tau)
            states.append(u.copy())
    return MarchResult(steps=steps, times=times, states=states)


def downscale(basis: ProjectionMatrix, u_bar: np.ndarray) -> np.ndarray:
    """Fine-grid reconstruction R^T u_bar."""
    if u_bar.shape[0] != basis.n_rows:
        raise DimensionMismatch(
            f"coarse vector length {u_bar.shape[0]} != {basis.n_rows} rows"
        )
    return basis.R.T @ u_bar


def dump_coarse_system(path, system: UpscaledSystem) -> None:
    """Plain-text triplet dump of the coarse operators for inspection."""
    with open(path, "w") as fh:
        fh.write(f"# coarse system, variant {system.variant}, n {system.n}\n")
        fh.write("# label row block continuum direction\n")
        for r, lab in enumerate(system.labels):
            d = lab.direction if lab.direction else "-"
            fh.write(f"label {r} {lab.block} {lab.continuum} {d}\n")
        for name, mat in (("T", system.T), ("M", system.M), ("C", system.C)):
            if mat is None:
                continue
            coo = sp.coo_matrix(mat)
            order = np.lexsort((coo.col, coo.row))
            for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{name} {i} {j} {v:.17g}\n")
        for i, v in enumerate(system.rhs):
            fh.write(f"rhs {i} {v:.17g}\n")
