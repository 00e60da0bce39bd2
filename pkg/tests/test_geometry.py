"""Geometry layer: validation, generator determinism, file format."""

import numpy as np
import pytest

from nlmc.errors import ConfigError, GeometryError
from nlmc.geometry import (
    PerforatedGeometry,
    Perforation,
    generate_layout,
    read_geometry,
    write_geometry,
)


def test_rectangle_must_have_positive_extent():
    with pytest.raises(GeometryError):
        PerforatedGeometry(x0=1.0, x1=1.0)
    with pytest.raises(GeometryError):
        PerforatedGeometry(y0=0.5, y1=0.2)


def test_unknown_dirichlet_side_rejected():
    with pytest.raises(GeometryError):
        PerforatedGeometry(dirichlet_sides=("north",))


def test_perforation_ids_must_be_consecutive():
    perfs = (Perforation(2, 0.5, 0.5, 0.1),)
    with pytest.raises(GeometryError):
        PerforatedGeometry(perforations=perfs)


def test_perforation_may_not_touch_outer_boundary():
    with pytest.raises(GeometryError):
        PerforatedGeometry(perforations=(Perforation(1, 0.1, 0.5, 0.1),))
    with pytest.raises(GeometryError):
        PerforatedGeometry(perforations=(Perforation(1, 0.5, 0.95, 0.06),))


def test_nonpositive_radius_rejected():
    with pytest.raises(GeometryError):
        PerforatedGeometry(perforations=(Perforation(1, 0.5, 0.5, 0.0),))


def test_min_clearance_two_disks():
    # centers 0.5 apart, radii 0.1 and 0.15 -> gap 0.25
    geom = PerforatedGeometry(
        perforations=(
            Perforation(1, 0.25, 0.5, 0.10),
            Perforation(2, 0.75, 0.5, 0.15),
        )
    )
    assert geom.min_clearance() == pytest.approx(0.25)


def test_min_clearance_single_disk_is_infinite():
    geom = PerforatedGeometry(perforations=(Perforation(1, 0.5, 0.5, 0.1),))
    assert geom.min_clearance() == np.inf


def test_contains_point_vectorized():
    geom = PerforatedGeometry(perforations=(Perforation(1, 0.5, 0.5, 0.2),))
    x = np.array([0.5, 0.05, 1.5, 0.5])
    y = np.array([0.5, 0.05, 0.5, 0.85])
    inside = geom.contains_point(x, y)
    # center of the hole, near a corner, outside the rectangle, above the hole
    assert inside.tolist() == [False, True, False, True]


def test_generate_layout_is_deterministic():
    a = generate_layout(5, 4, 0.02, 0.03, 0.01, seed=7)
    b = generate_layout(5, 4, 0.02, 0.03, 0.01, seed=7)
    assert a.perforations == b.perforations
    c = generate_layout(5, 4, 0.02, 0.03, 0.01, seed=8)
    assert a.perforations != c.perforations


def test_generate_layout_one_disk_per_cell():
    geom = generate_layout(6, 3, 0.02, 0.04, 0.01, seed=1)
    assert len(geom.perforations) == 18
    dx, dy = 1.0 / 6, 1.0 / 3
    for idx, p in enumerate(geom.perforations):
        i, j = idx % 6, idx // 6
        assert abs(p.cx - (i + 0.5) * dx) <= 0.01 + 1e-15
        assert abs(p.cy - (j + 0.5) * dy) <= 0.01 + 1e-15
        assert 0.02 <= p.r <= 0.04


def test_generate_layout_rejects_overfull_cells():
    # radius + jitter >= half the lattice pitch cannot fit
    with pytest.raises(GeometryError):
        generate_layout(10, 10, 0.02, 0.045, 0.01, seed=0)


def test_generate_layout_records_metadata():
    geom = generate_layout(3, 3, 0.02, 0.03, 0.005, seed=42)
    assert geom.metadata["generator"] == "grid-jitter"
    assert geom.metadata["seed"] == 42
    assert geom.metadata["lattice"] == "3x3"


def test_geometry_roundtrip(tmp_path):
    geom = generate_layout(
        4, 4, 0.02, 0.03, 0.01, seed=3, dirichlet_sides=("left", "top")
    )
    path = tmp_path / "layout.txt"
    write_geometry(geom, path)
    back = read_geometry(path)
    assert back.dirichlet_sides == ("left", "top")
    assert len(back.perforations) == 16
    for p, q in zip(geom.perforations, back.perforations):
        assert p.id == q.id
        assert p.cx == q.cx and p.cy == q.cy and p.r == q.r
    # metadata values come back as strings
    assert back.metadata["seed"] == "3"


def test_geometry_file_comments_and_blanks_ignored(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text(
        "# header\n\nrect 0 0 2 1  # trailing comment\n"
        "perf 1 0.5 0.5 0.1\n"
    )
    geom = read_geometry(path)
    assert geom.x1 == 2.0
    assert geom.perforations[0].r == 0.1


def test_geometry_file_unknown_record(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("rect 0 0 1 1\ncircle 1 0.5 0.5 0.1\n")
    with pytest.raises(ConfigError, match="unknown record"):
        read_geometry(path)


def test_geometry_file_malformed_record(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("rect 0 0 1\n")
    with pytest.raises(ConfigError, match="malformed"):
        read_geometry(path)


def test_geometry_file_requires_rect(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("perf 1 0.5 0.5 0.1\n")
    with pytest.raises(ConfigError, match="rect"):
        read_geometry(path)


def test_shipped_geometry_is_valid(shipped_geometry):
    geom = shipped_geometry
    assert len(geom.perforations) == 400
    assert geom.metadata["lattice"] == "25x16"
    # clearance must leave room for the study resolution (160 cells/side)
    cell_diam = np.hypot(1.0 / 160, 1.0 / 160)
    assert geom.min_clearance() > 2.0 * cell_diam
    radii = np.array([p.r for p in geom.perforations])
    assert radii.min() >= 0.0065 and radii.max() <= 0.008
