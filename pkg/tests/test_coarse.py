"""Upscaled systems: assembly identities, conservation, time stepping."""

import numpy as np
import pytest
import scipy.sparse as sp

from nlmc.basis import (
    BasisWorkspace,
    DofLabel,
    ProjectionMatrix,
    build_basis_scalar,
    label_averaging_operator,
    measures_for,
)
from nlmc.coarse import (
    assemble_parabolic,
    assemble_robin,
    assemble_steady,
    coarse_time_march,
    downscale,
    dump_coarse_system,
    lumped_load,
    solve_steady,
    zero_row_sum,
)
from nlmc.errors import DimensionMismatch
from nlmc.fem import (
    MaterialParams,
    assemble_load,
    assemble_stiffness_laplace,
)


def identity_basis(n):
    labels = [DofLabel(b, 0) for b in range(n)]
    return ProjectionMatrix(
        R=sp.identity(n, format="csr"),
        labels=labels,
        basis_type=2,
        layers=1,
        is_vector=False,
    )


@pytest.fixture(scope="module")
def small_system(small_setup, small_workspace):
    """Real coupled system on the 4-disk layout (type 2, s = 2)."""
    mesh, grid, segments = small_setup
    pm = build_basis_scalar(mesh, grid, segments, 2, 2, workspace=small_workspace)
    A = assemble_stiffness_laplace(mesh, k=1.0)
    measures = measures_for(pm, grid, segments)
    return mesh, grid, segments, pm, A, measures


def test_steady_with_identity_basis_reproduces_fine():
    rng = np.random.default_rng(2)
    n = 12
    Adense = rng.standard_normal((n, n))
    A = sp.csr_matrix(Adense + Adense.T + 20 * np.eye(n))
    b = rng.standard_normal(n)
    sys_ = assemble_steady(identity_basis(n), A, b)
    np.testing.assert_allclose(sys_.T.toarray(), A.toarray(), atol=1e-14)
    np.testing.assert_allclose(sys_.rhs, b)
    assert sys_.variant == "steady"


def test_steady_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        assemble_steady(identity_basis(3), sp.identity(4, format="csr"), np.ones(4))


def test_steady_system_is_symmetric(small_system):
    _, _, _, pm, A, _ = small_system
    b = np.zeros(A.shape[0])
    sys_ = assemble_steady(pm, A, b)
    asym = (sys_.T - sys_.T.T).tocoo()
    if asym.nnz:
        assert np.abs(asym.data).max() == 0.0


def test_steady_energy_consistency(small_system):
    """Coarse quadratic form equals the fine form of the downscaled field."""
    _, _, _, pm, A, _ = small_system
    sys_ = assemble_steady(pm, A, np.zeros(A.shape[0]))
    rng = np.random.default_rng(5)
    for _ in range(3):
        x = rng.standard_normal(sys_.n)
        u = downscale(pm, x)
        coarse = float(x @ (sys_.T @ x))
        fine = float(u @ (A @ u))
        assert coarse == pytest.approx(fine, rel=1e-10)


def test_zero_row_sum_correction():
    rng = np.random.default_rng(8)
    M = rng.standard_normal((6, 6))
    T = sp.csr_matrix(M + M.T)
    Tc = zero_row_sum(T)
    rows = np.asarray(Tc.sum(axis=1)).ravel()
    assert np.abs(rows).max() <= 1e-10 * np.abs(Tc.data).max()
    # off-diagonal entries untouched
    off = ~np.eye(6, dtype=bool)
    np.testing.assert_allclose(Tc.toarray()[off], T.toarray()[off])


def test_lumped_load_split():
    labels = [DofLabel(0, 0), DofLabel(0, 1), DofLabel(1, 0)]
    measures = np.array([0.25, 0.1, 0.3])
    rhs = lumped_load(labels, measures, f=2.0, g=5.0)
    np.testing.assert_allclose(rhs, [0.5, 0.5, 0.6])


def test_parabolic_mass_defaults_to_background_only(small_system):
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_parabolic(pm, A, measures, c=2.0, f=1.0, g=3.0)
    diag = sys_.M.diagonal()
    for r, lab in enumerate(pm.labels):
        if lab.continuum == 0:
            assert diag[r] == pytest.approx(2.0 * measures[r])
            assert sys_.rhs[r] == pytest.approx(1.0 * measures[r])
        else:
            assert diag[r] == 0.0
            assert sys_.rhs[r] == pytest.approx(3.0 * measures[r])
    rows = np.asarray(sys_.T.sum(axis=1)).ravel()
    assert np.abs(rows).max() <= 1e-10 * np.abs(sys_.T.data).max()


def test_parabolic_interface_capacity_option(small_system):
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_parabolic(pm, A, measures, c=1.0, c_perf=0.5)
    diag = sys_.M.diagonal()
    for r, lab in enumerate(pm.labels):
        want = (1.0 if lab.continuum == 0 else 0.5) * measures[r]
        assert diag[r] == pytest.approx(want)


def test_parabolic_measure_size_check(small_system):
    _, _, _, pm, A, measures = small_system
    with pytest.raises(DimensionMismatch):
        assemble_parabolic(pm, A, measures[:-1])


def test_parabolic_march_preserves_constants(small_system):
    """f = g = 0: a constant initial state stays constant."""
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_parabolic(pm, A, measures, c=1.0, f=0.0, g=0.0)
    u0 = np.full(sys_.n, 4.0)
    hist = coarse_time_march(sys_, u0, tau=2.5e-4, n_steps=20)
    for u in hist.states:
        assert np.abs(u - 4.0).max() <= 1e-10


def test_coarse_march_matches_dense_reference(small_system):
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_parabolic(pm, A, measures, c=1.0, g=1.0)
    tau, n_steps = 1e-3, 5
    hist = coarse_time_march(sys_, np.zeros(sys_.n), tau, n_steps)
    # dense implicit Euler replay
    K = (sys_.M / tau + sys_.T).toarray()
    u = np.zeros(sys_.n)
    Md = sys_.M.toarray() / tau
    for _ in range(n_steps):
        u = np.linalg.solve(K, sys_.rhs + Md @ u)
    np.testing.assert_allclose(hist.final, u, atol=1e-9 * max(1.0, np.abs(u).max()))


def test_coarse_march_snapshots_and_errors(small_system):
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_parabolic(pm, A, measures, g=1.0)
    hist = coarse_time_march(sys_, np.zeros(sys_.n), 1e-3, 8, snapshots=[2, 8])
    assert hist.steps == [2, 8]
    steady = assemble_steady(pm, A, np.zeros(A.shape[0]))
    with pytest.raises(DimensionMismatch):
        coarse_time_march(steady, np.zeros(steady.n), 1e-3, 2)
    with pytest.raises(DimensionMismatch):
        coarse_time_march(sys_, np.zeros(sys_.n - 1), 1e-3, 2)


def test_robin_diagonal_and_rhs(small_system):
    _, _, _, pm, A, measures = small_system
    base = assemble_parabolic(pm, A, measures)
    sys_ = assemble_robin(base, alpha=100.0, g=7.0)
    diag = sys_.C.diagonal()
    for r, lab in enumerate(pm.labels):
        if lab.continuum == 0:
            assert diag[r] == 0.0
            assert sys_.rhs[r] == base.rhs[r]
        else:
            assert diag[r] == pytest.approx(100.0 * measures[r])
            assert sys_.rhs[r] == pytest.approx(base.rhs[r] + 700.0 * measures[r])
    assert sys_.variant == "robin"
    # original system untouched
    assert base.C is None


def test_robin_march_approaches_constant(small_system):
    """alpha = 100, g = 7: every coarse continuum relaxes to 7."""
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_robin(assemble_parabolic(pm, A, measures), 100.0, 7.0)
    hist = coarse_time_march(sys_, np.zeros(sys_.n), 5e-3, 250)
    assert np.abs(hist.final - 7.0).max() < 0.07
    # steady limit solves (T + C) u = rhs
    steady = solve_steady(sys_)
    assert np.abs(steady - 7.0).max() < 1e-8


def test_operator_requires_mass_for_stepping(small_system):
    _, _, _, pm, A, _ = small_system
    sys_ = assemble_steady(pm, A, np.zeros(A.shape[0]))
    with pytest.raises(DimensionMismatch):
        sys_.operator(tau=0.1)


def test_downscale_averaging_identity(small_system, small_workspace):
    """Cell and segment averages of R^T u_bar reproduce u_bar exactly."""
    _, _, _, pm, _, _ = small_system
    G = label_averaging_operator(small_workspace, pm)
    rng = np.random.default_rng(31)
    for _ in range(5):
        ubar = rng.standard_normal(pm.n_rows)
        u = downscale(pm, ubar)
        np.testing.assert_allclose(G @ u, ubar, atol=1e-9)
    with pytest.raises(DimensionMismatch):
        downscale(pm, np.zeros(pm.n_rows + 1))


def test_dump_coarse_system_roundtrips_entries(small_system, tmp_path):
    _, _, _, pm, A, measures = small_system
    sys_ = assemble_robin(assemble_parabolic(pm, A, measures), 5.0, 1.0)
    path = tmp_path / "system.txt"
    dump_coarse_system(path, sys_)
    text = path.read_text().splitlines()
    assert text[0].startswith("# coarse system, variant robin")
    kinds = {ln.split()[0] for ln in text if not ln.startswith("#")}
    assert kinds == {"label", "T", "M", "C", "rhs"}
    t_entries = [ln.split() for ln in text if ln.startswith("T ")]
    i, j, v = t_entries[0][1:]
    assert sys_.T[int(i), int(j)] == pytest.approx(float(v))
