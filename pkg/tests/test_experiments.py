"""Scenario orchestration: caching, reference lookups, run_scenario output."""

import dataclasses
import json
import os

import pytest

from conftest import smoke_config
from nlmc import experiments
from nlmc.errors import SolverError
from nlmc.experiments import (
    basis_cache_key,
    geometry_hash,
    load_or_build_basis,
    reference_error,
    run_scenario,
)
from nlmc.fem import MaterialParams
from nlmc.geometry import read_geometry
from nlmc.mesh import build_coarse_grid, build_fine_mesh, index_perforation_segments
from nlmc.metrics import read_error_csv
from nlmc.scenario import geometry_for, load_scenario


def assert_rows_match(rows, reports):
    """CSV rows equal the in-memory reports up to 6-decimal formatting."""
    assert len(rows) == len(reports)
    for a, b in zip(rows, reports):
        assert (a.scenario, a.grid, a.basis_type, a.layers, a.component,
                a.snapshot_step, a.dof_f, a.dof_c, a.status) == (
            b.scenario, b.grid, b.basis_type, b.layers, b.component,
            b.snapshot_step, b.dof_f, b.dof_c, b.status)
        if b.error_pct is None:
            assert a.error_pct is None
        else:
            assert a.error_pct == pytest.approx(b.error_pct, abs=1e-6)


@pytest.fixture(scope="module")
def smoke_geom():
    path = os.path.join(os.path.dirname(__file__), "data", "smoke_geometry.txt")
    return read_geometry(path)


@pytest.fixture(scope="module")
def smoke_setup(smoke_geom):
    geom = dataclasses.replace(smoke_geom, dirichlet_sides=("left",))
    mesh = build_fine_mesh(geom, 1.0 / 32)
    grid = build_coarse_grid(mesh, 4, 4)
    segments = index_perforation_segments(mesh, grid)
    return mesh, grid, segments


def test_geometry_hash_stable_and_sensitive(smoke_geom):
    again = read_geometry(
        os.path.join(os.path.dirname(__file__), "data", "smoke_geometry.txt")
    )
    assert geometry_hash(smoke_geom) == geometry_hash(again)
    p = dataclasses.replace(smoke_geom.perforations[0], r=0.17)
    moved = dataclasses.replace(smoke_geom, perforations=(p,))
    assert geometry_hash(moved) != geometry_hash(smoke_geom)
    # outer sides do not enter the hash; the cache key carries them
    tagged = dataclasses.replace(smoke_geom, dirichlet_sides=("left",))
    assert geometry_hash(tagged) == geometry_hash(smoke_geom)


def test_basis_cache_key_components(smoke_geom):
    mat = MaterialParams()
    base = basis_cache_key(smoke_geom, 32, 4, 4, 2, 1, "scalar", mat)
    assert base.endswith("_dirnone")
    assert "_n32_g4x4_s2_t1_scalar" in base
    tagged = dataclasses.replace(smoke_geom, dirichlet_sides=("left", "top"))
    assert basis_cache_key(tagged, 32, 4, 4, 2, 1, "scalar", mat).endswith("_dirlt")
    # every discretization knob lands in the key
    variants = [
        basis_cache_key(smoke_geom, 64, 4, 4, 2, 1, "scalar", mat),
        basis_cache_key(smoke_geom, 32, 8, 8, 2, 1, "scalar", mat),
        basis_cache_key(smoke_geom, 32, 4, 4, 3, 1, "scalar", mat),
        basis_cache_key(smoke_geom, 32, 4, 4, 2, 2, "scalar", mat),
        basis_cache_key(smoke_geom, 32, 4, 4, 2, 1, "scalar",
                        MaterialParams(k=2.0)),
    ]
    assert len(set(variants + [base])) == 6
    # outer mode matters for elasticity keys, not scalar ones
    ela_roller = basis_cache_key(smoke_geom, 32, 4, 4, 2, 1, "elasticity", mat)
    ela_clamp = basis_cache_key(
        smoke_geom, 32, 4, 4, 2, 1, "elasticity", mat, outer_mode="clamp"
    )
    assert ela_roller != ela_clamp
    scalar_clamp = basis_cache_key(
        smoke_geom, 32, 4, 4, 2, 1, "scalar", mat, outer_mode="clamp"
    )
    assert scalar_clamp == base


def test_load_or_build_basis_uses_cache(smoke_setup, tmp_path, monkeypatch):
    mesh, grid, segments = smoke_setup
    cache = str(tmp_path / "cache")
    pm = load_or_build_basis(mesh, grid, segments, 1, 2, cache_dir=cache)
    files = os.listdir(cache)
    assert len(files) == 1 and files[0].endswith(".npz")

    def boom(*a, **k):
        raise AssertionError("cache miss: basis was rebuilt")

    monkeypatch.setattr(experiments.basis_mod, "build_basis_scalar", boom)
    back = load_or_build_basis(mesh, grid, segments, 1, 2, cache_dir=cache)
    assert back.labels == pm.labels
    assert (back.R != pm.R).nnz == 0


def test_reference_error_lookup():
    assert reference_error("laplace-steady", "20x20", 1, 4) == 1.836
    assert reference_error("laplace-steady", "40x40", 2, 6) == 0.642
    assert reference_error("elasticity-steady", "40x40", 2, 6, None, "x") == 0.460
    assert reference_error("parabolic-neumann", "40x40", 1, 6, 20) == 0.224
    assert reference_error("parabolic-robin", "40x40", 2, 6, 20) == 0.274
    assert reference_error("laplace-steady", "20x20", 1, 5) is None
    assert reference_error("unknown", "20x20", 1, 1) is None


def test_run_scenario_steady_outputs(tmp_path, smoke_cache):
    spec = load_scenario(smoke_config("smoke_steady"))
    out = tmp_path / "run"
    reports = run_scenario(spec, str(out), cache_dir=smoke_cache)
    # 1 grid x 2 types x 2 layer counts
    assert len(reports) == 4
    assert all(r.status == "ok" for r in reports)
    for t in (1, 2):
        errs = {r.layers: r.error_pct for r in reports if r.basis_type == t}
        assert errs[2] < errs[1]

    again = load_scenario(out / "scenario_resolved.toml")
    assert again.name == spec.name and again.fine_n == spec.fine_n
    geom = read_geometry(out / "geometry.txt")
    assert len(geom.perforations) == 1

    assert_rows_match(read_error_csv(out / "errors.csv"), reports)

    with open(out / "manifest.json") as fh:
        manifest = json.load(fh)
    assert manifest["scenario"] == "smoke-steady"
    assert manifest["csv"] == "errors.csv"
    assert manifest["grids"][0]["tag"] == "4x4"
    # fields = "final": exports only at the largest s, for each type
    assert len(manifest["fields"]) == 4
    for entry in manifest["fields"]:
        assert entry["layers"] == 2
        assert entry["kind"] in ("triangles", "blocks")
        assert (out / entry["path"]).exists()


def test_run_scenario_deterministic(tmp_path, smoke_cache):
    spec = load_scenario(smoke_config("smoke_steady"))
    run_scenario(spec, str(tmp_path / "a"), cache_dir=smoke_cache)
    run_scenario(spec, str(tmp_path / "b"), cache_dir=smoke_cache)
    csv_a = (tmp_path / "a" / "errors.csv").read_bytes()
    csv_b = (tmp_path / "b" / "errors.csv").read_bytes()
    assert csv_a == csv_b


def test_run_scenario_records_cell_failures(tmp_path, smoke_cache, monkeypatch):
    spec = load_scenario(smoke_config("smoke_steady"))
    real = experiments.load_or_build_basis

    def flaky(mesh, grid, segments, s, basis_type, **kw):
        if basis_type == 1 and s == 2:
            raise SolverError("synthetic failure")
        return real(mesh, grid, segments, s, basis_type, **kw)

    monkeypatch.setattr(experiments, "load_or_build_basis", flaky)
    reports = run_scenario(spec, str(tmp_path / "run"), cache_dir=smoke_cache)
    assert len(reports) == 4
    failed = [r for r in reports if r.status != "ok"]
    assert len(failed) == 1
    assert failed[0].status == "failed:SolverError"
    assert failed[0].basis_type == 1 and failed[0].layers == 2
    assert failed[0].error_pct is None and failed[0].dof_c == 0
    assert_rows_match(read_error_csv(tmp_path / "run" / "errors.csv"), reports)


def test_run_scenario_parabolic_snapshots(tmp_path, smoke_cache):
    spec = load_scenario(smoke_config("smoke_parabolic"))
    out = tmp_path / "run"
    reports = run_scenario(spec, str(out), cache_dir=smoke_cache)
    assert [r.snapshot_step for r in reports] == [2, 4]
    for r in reports:
        assert r.snapshot_time == pytest.approx(r.snapshot_step * spec.tau)
        assert r.status == "ok"
    # fields = "all": every snapshot of the single cell is exported
    with open(out / "manifest.json") as fh:
        manifest = json.load(fh)
    steps = sorted(
        e["snapshot_step"] for e in manifest["fields"] if e["kind"] == "blocks"
    )
    assert steps == [2, 4]


def test_run_scenario_elasticity_components(tmp_path, smoke_cache):
    spec = load_scenario(smoke_config("smoke_elasticity"))
    reports = run_scenario(spec, str(tmp_path / "run"), cache_dir=smoke_cache)
    assert sorted(r.component for r in reports) == ["x", "y"]
    assert all(r.status == "ok" for r in reports)
    assert all(r.error_pct is not None for r in reports)
    # coarse row count doubles relative to a scalar basis on the same grid
    assert reports[0].dof_c % 2 == 0
