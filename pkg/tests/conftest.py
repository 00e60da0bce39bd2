"""Shared fixtures: small test geometries and the shipped study setup.

Session-scoped fixtures build each mesh / workspace once.  Multiscale
bases for the shipped geometry are expensive, so they go through the same
disk cache the CLI uses (``NLMC_CACHE_DIR``, default ``.basis-cache`` in
the repository root); the first full run builds them, later runs load.
"""

import dataclasses
import os
from collections import OrderedDict

import pytest

from nlmc import basis as basis_mod
from nlmc import experiments
from nlmc.fem import MaterialParams
from nlmc.geometry import PerforatedGeometry, Perforation, read_geometry
from nlmc.mesh import build_coarse_grid, build_fine_mesh, index_perforation_segments

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(REPO_ROOT, "src", "nlmc", "data")
TESTS_DATA = os.path.join(REPO_ROOT, "tests", "data")

FINE_N = 160


def smoke_config(name: str) -> str:
    """Path of a tiny single-disk scenario under tests/data."""
    return os.path.join(TESTS_DATA, f"{name}.toml")


@pytest.fixture(scope="session")
def cache_dir():
    path = os.environ.get(
        "NLMC_CACHE_DIR", os.path.join(REPO_ROOT, ".basis-cache")
    )
    os.makedirs(path, exist_ok=True)
    return path


@pytest.fixture(scope="session")
def shipped_geometry():
    """The committed 400-perforation layout, without boundary tagging."""
    return read_geometry(os.path.join(DATA_DIR, "default_geometry.txt"))


class SetupBank:
    """Lazily built (mesh, grid, segments, workspace) combinations.

    Keyed by Dirichlet sides, coarse size and problem kind so the steady
    scenarios (Dirichlet left/bottom) and the time-dependent ones (no
    outer Dirichlet) share meshes where possible.
    """

    def __init__(self, geom: PerforatedGeometry, cache_dir: str):
        self.base_geom = geom
        self.cache_dir = cache_dir
        self._meshes = {}
        self._grids = {}
        self._workspaces = {}
        self._bases = OrderedDict()
        self._basis_keep = 2

    def mesh(self, sides=()):
        key = tuple(sorted(sides))
        if key not in self._meshes:
            geom = dataclasses.replace(self.base_geom, dirichlet_sides=key)
            self._meshes[key] = build_fine_mesh(geom, geom.width / FINE_N)
        return self._meshes[key]

    def grid(self, sides, n):
        key = (tuple(sorted(sides)), n)
        if key not in self._grids:
            mesh = self.mesh(sides)
            grid = build_coarse_grid(mesh, n, n)
            segments = index_perforation_segments(mesh, grid)
            self._grids[key] = (grid, segments)
        return self._grids[key]

    def workspace(self, sides, n, vector=False, outer_mode="roller"):
        key = (tuple(sorted(sides)), n, vector, outer_mode)
        if key not in self._workspaces:
            mesh = self.mesh(sides)
            grid, segments = self.grid(sides, n)
            self._workspaces[key] = basis_mod.BasisWorkspace(
                mesh, grid, segments, MaterialParams(),
                vector=vector, outer_mode=outer_mode,
            )
        return self._workspaces[key]

    def basis(self, sides, n, s, basis_type, kind="scalar", outer_mode="roller"):
        """Disk-cached projection matrix, with a small in-memory LRU.

        The 40x40 matrices are a few hundred MB decompressed, so only the
        two most recent stay resident.
        """
        key = (tuple(sorted(sides)), n, s, basis_type, kind)
        if key in self._bases:
            self._bases.move_to_end(key)
            return self._bases[key]
        mesh = self.mesh(sides)
        grid, segments = self.grid(sides, n)
        ws = self.workspace(sides, n, vector=(kind != "scalar"),
                            outer_mode=outer_mode)
        pm = experiments.load_or_build_basis(
            mesh, grid, segments, s, basis_type, kind=kind,
            params=MaterialParams(), cache_dir=self.cache_dir,
            workspace=ws, outer_mode=outer_mode,
        )
        self._bases[key] = pm
        while len(self._bases) > self._basis_keep:
            self._bases.popitem(last=False)
        return pm


@pytest.fixture(scope="session")
def smoke_cache(tmp_path_factory):
    """Shared basis cache for the tests/data smoke scenarios."""
    return str(tmp_path_factory.mktemp("smoke-cache"))


@pytest.fixture(scope="session")
def bank(shipped_geometry, cache_dir):
    return SetupBank(shipped_geometry, cache_dir)


# ---------------------------------------------------------------------------
# small geometries for unit tests


@pytest.fixture(scope="session")
def empty_geometry():
    return PerforatedGeometry()


def small_geometry(dirichlet_sides=()):
    """Four disks over a 4x4 coarse grid at n=64, covering the segment
    topology cases: one disk inside a block, one straddling a block line,
    two separate disks in one block."""
    perfs = (
        Perforation(1, 0.375, 0.40, 0.060),
        Perforation(2, 0.50, 0.70, 0.070),
        Perforation(3, 0.8125, 0.08, 0.035),
        Perforation(4, 0.90, 0.16, 0.035),
    )
    return PerforatedGeometry(
        perforations=perfs, dirichlet_sides=tuple(dirichlet_sides)
    )


@pytest.fixture(scope="session")
def small_setup():
    """(mesh, grid, segments) for the 4-disk layout, 64x64 fine, 4x4 coarse."""
    geom = small_geometry()
    mesh = build_fine_mesh(geom, 1.0 / 64)
    grid = build_coarse_grid(mesh, 4, 4)
    segments = index_perforation_segments(mesh, grid)
    return mesh, grid, segments


@pytest.fixture(scope="session")
def small_workspace(small_setup):
    mesh, grid, segments = small_setup
    return basis_mod.BasisWorkspace(mesh, grid, segments, MaterialParams())
