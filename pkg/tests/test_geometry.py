import math

import numpy as np
import pytest

from mar3d.autodiff import Rng
from mar3d.errors import ConfigError, ParseError, ValidationError
from mar3d.geometry import (
    ScalarGrid,
    TriangleMesh,
    View,
    build_pyramid,
    fourier_embed,
    is_watertight,
    load_obj,
    make_corpus,
    marching_cubes,
    normalize_mesh,
    occupancy,
    render_condition,
    rotation_augment,
    rotation_z,
    sample_occupancy_batch,
    sample_surface,
    save_obj,
    winding_number,
)
from mar3d.geometry.corpus import box_mesh, capsule_mesh, icosphere, torus_mesh

TETRA_OBJ = """# unit tetrahedron
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 2 3
f 1 2 4
f 1 3 4
f 2 3 4
"""


# ---------------------------------------------------------------------------
# OBJ I/O


def test_load_obj_tetrahedron(tmp_path):
    path = tmp_path / "tet.obj"
    path.write_text(TETRA_OBJ)
    mesh = load_obj(path)
    assert len(mesh.vertices) == 4
    assert len(mesh.faces) == 4


def test_obj_roundtrip(tmp_path):
    mesh = icosphere(0.5, 2)
    path = tmp_path / "sphere.obj"
    save_obj(mesh, path)
    loaded = load_obj(path)
    np.testing.assert_array_equal(loaded.faces, mesh.faces)
    np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-6)


def test_obj_polygon_fan_triangulation(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    mesh = load_obj(path)
    assert len(mesh.faces) == 2


def test_obj_zero_index_rejected(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")
    with pytest.raises(ValidationError):
        load_obj(path)


def test_obj_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv oops 0 0\n")
    with pytest.raises(ParseError) as exc:
        load_obj(path)
    assert exc.value.line == 2


def test_obj_out_of_range_index(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
    with pytest.raises(ValidationError):
        load_obj(path)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_unit_cube_from_offset():
    mesh = box_mesh((1, 1, 1)).transformed(translation=(1, 1, 1))  # cube [0,2]^3
    normalized = normalize_mesh(mesh)
    lo, hi = normalized.bounds()
    np.testing.assert_allclose(lo, [-0.5, -0.5, -0.5], atol=1e-12)
    np.testing.assert_allclose(hi, [0.5, 0.5, 0.5], atol=1e-12)


def test_normalize_idempotent():
    mesh = normalize_mesh(icosphere(0.5, 1))
    again = normalize_mesh(mesh)
    np.testing.assert_allclose(again.vertices, mesh.vertices, atol=1e-6)


def test_normalize_preserves_aspect():
    mesh = box_mesh((2, 1, 0.5))  # 4 x 2 x 1 box
    normalized = normalize_mesh(mesh)
    lo, hi = normalized.bounds()
    np.testing.assert_allclose(hi - lo, [1.0, 0.5, 0.25], atol=1e-12)


def test_normalize_empty_mesh_rejected():
    with pytest.raises(ValidationError):
        normalize_mesh(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32)))


# ---------------------------------------------------------------------------
# occupancy oracle


def test_occupancy_unit_cube():
    cube = box_mesh((0.5, 0.5, 0.5))
    labels = occupancy(cube, np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    np.testing.assert_array_equal(labels, [1.0, 0.0])


def test_occupancy_sphere_radial_band():
    sphere = icosphere(0.5, 3)
    rng = Rng(0)
    dirs = rng.normal((64, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    inside = occupancy(sphere, dirs * 0.49)
    outside = occupancy(sphere, dirs * 0.51)
    np.testing.assert_array_equal(inside, np.ones(64))
    np.testing.assert_array_equal(outside, np.zeros(64))


def test_occupancy_far_point():
    assert occupancy(icosphere(0.5, 2), np.array([[5.0, 5.0, 5.0]]))[0] == 0.0


def test_winding_number_values():
    cube = box_mesh((0.5, 0.5, 0.5))
    w = winding_number(cube, np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]))
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-9)


@pytest.mark.parametrize("family", ["sphere", "box", "torus", "capsule"])
def test_occupancy_matches_analytic_containment(family):
    entry = make_corpus({family: 1}, seed=11)[0]
    rng = Rng(3)
    pts = rng.uniform((2000, 3), -0.55, 0.55)
    analytic = entry.contains(pts)
    wind = occupancy(entry.mesh, pts).astype(bool)
    # exclude the 1-voxel-scale discretization band near the ideal surface
    clear = entry.surface_distance(pts) > 0.02
    assert clear.sum() > 1000
    assert (analytic[clear] == wind[clear]).all()


# ---------------------------------------------------------------------------
# surface sampling


def test_sample_surface_area_weighted():
    cube = box_mesh((0.5, 0.5, 0.5))
    pts, _ = sample_surface(cube, 60_000, Rng(0))
    per_side = []
    for axis in range(3):
        for sign in (-0.5, 0.5):
            per_side.append(int((np.abs(pts[:, axis] - sign) < 1e-9).sum()))
    assert sum(per_side) == 60_000
    for count in per_side:
        assert abs(count - 10_000) < 0.03 * 10_000


def test_sample_surface_normals_unit():
    _, normals = sample_surface(icosphere(0.5, 2), 500, Rng(1))
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-4)


def test_sample_surface_deterministic():
    a, na = sample_surface(icosphere(0.5, 2), 100, Rng(7))
    b, nb = sample_surface(icosphere(0.5, 2), 100, Rng(7))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(na, nb)


def test_sample_surface_validations():
    with pytest.raises(ValidationError):
        sample_surface(icosphere(0.5, 1), 0, Rng(0))
    degenerate = TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 2]], np.int32))
    with pytest.raises(ValidationError):
        sample_surface(degenerate, 10, Rng(0))


def test_build_pyramid_paper_and_desk_sizes():
    sphere = icosphere(0.5, 3)
    paper = build_pyramid(sphere, (16384, 4096, 1024), Rng(0))
    assert paper.level_sizes() == (16384, 4096, 1024)
    desk = build_pyramid(sphere, (2048, 512, 128), Rng(0))
    assert desk.level_sizes() == (2048, 512, 128)


def test_build_pyramid_points_on_surface():
    sphere = icosphere(0.5, 3)
    pyramid = build_pyramid(sphere, (256, 64, 16), Rng(5))
    for level in pyramid.points:
        radii = np.linalg.norm(level, axis=1)
        # icosphere subdiv 3 chords deviate from the analytic sphere by < 1e-2
        assert np.abs(radii - 0.5).max() < 1e-2


def test_build_pyramid_requires_decreasing_sizes():
    with pytest.raises(ValidationError):
        build_pyramid(icosphere(0.5, 1), (128, 128, 64), Rng(0))


# ---------------------------------------------------------------------------
# occupancy batches


def test_occupancy_batch_split_and_count():
    cube = box_mesh((0.5, 0.5, 0.5))
    batch = sample_occupancy_batch(cube, 20480, Rng(0))
    assert len(batch.points) == 20480
    assert len(batch.labels) == 20480
    # second half is uniform in the padded box by construction
    uniform = batch.points[10240:]
    assert (np.abs(uniform) <= 0.55).all()


def test_occupancy_batch_uniform_fraction_matches_volume():
    s = 0.6
    cube = box_mesh((s / 2, s / 2, s / 2))
    batch = sample_occupancy_batch(cube, 40000, Rng(2))
    uniform_labels = batch.labels[20000:]
    expected = s**3 / 1.1**3
    sigma = math.sqrt(expected * (1 - expected) / 20000)
    assert abs(uniform_labels.mean() - expected) < 3 * sigma


def test_occupancy_batch_empty_region_labels_zero():
    # a small sphere near a corner leaves the opposite corner region empty
    small = icosphere(0.15, 2).transformed(translation=(0.3, 0.3, 0.3))
    batch = sample_occupancy_batch(small, 2000, Rng(3))
    far = batch.points[(batch.points < -0.2).all(axis=1)]
    if len(far):
        np.testing.assert_array_equal(occupancy(small, far), 0.0)


# ---------------------------------------------------------------------------
# positional embedding


def test_fourier_embed_at_zero():
    out = fourier_embed(np.zeros(3), 2)
    expected = [0, 0, 0] + [0, 1, 0, 1] * 3
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_fourier_embed_length():
    for L in (0, 1, 4):
        assert fourier_embed(np.zeros(3), L).shape[-1] == 3 + 6 * L


def test_fourier_embed_quarter():
    out = fourier_embed(np.array([0.25, 0.0, 0.0]), 1)
    # layout: x y z | sin(pi x) cos(pi x) | sin(pi y) cos(pi y) | ...
    assert abs(out[3] - math.sqrt(2) / 2) < 1e-12
    assert abs(out[4] - math.sqrt(2) / 2) < 1e-12


# ---------------------------------------------------------------------------
# condition rendering


def test_render_cube_top_view_coverage():
    cube = box_mesh((0.5, 0.5, 0.5))
    img = render_condition(cube, View(azimuth=0.0, elevation=math.pi / 2), resolution=64)
    count = int(img.silhouette.sum())
    side = 64 / 1.1
    expected = side**2
    boundary = 4 * side * 2  # two-pixel band around the square
    assert abs(count - expected) <= boundary


def test_render_background_is_zero():
    img = render_condition(icosphere(0.3, 2), View(), resolution=48)
    background = img.silhouette == 0
    assert background.any()
    np.testing.assert_array_equal(img.depth[background], 0.0)
    inside = img.silhouette == 1
    assert (img.depth[inside] >= 0).all() and (img.depth[inside] <= 1).all()


def test_render_frame_equivalence():
    mesh = box_mesh((0.5, 0.3, 0.2))
    theta = 0.7
    by_view = render_condition(mesh, View(azimuth=theta), resolution=48)
    by_mesh = render_condition(mesh.transformed(rotation=rotation_z(-theta)), View(), resolution=48)
    np.testing.assert_array_equal(by_view.silhouette, by_mesh.silhouette)
    np.testing.assert_array_equal(by_view.depth, by_mesh.depth)


def test_rotation_augment_56_pairs():
    mesh = box_mesh((0.5, 0.3, 0.2))
    pairs = rotation_augment(mesh, Rng(0), resolution=32)
    assert len(pairs) == 56
    rotated, image = pairs[9]
    redo = render_condition(rotated, View(), resolution=32)
    np.testing.assert_array_equal(image.silhouette, redo.silhouette)
    np.testing.assert_array_equal(image.depth, redo.depth)


def test_rotation_augment_deterministic():
    mesh = box_mesh((0.5, 0.3, 0.2))
    a = rotation_augment(mesh, Rng(4), resolution=16)
    b = rotation_augment(mesh, Rng(4), resolution=16)
    for (ma, ia), (mb, ib) in zip(a, b):
        np.testing.assert_array_equal(ma.vertices, mb.vertices)
        np.testing.assert_array_equal(ia.depth, ib.depth)


# ---------------------------------------------------------------------------
# marching cubes


def test_marching_cubes_sphere_radii():
    grid = ScalarGrid.from_function(
        lambda p: (np.linalg.norm(p, axis=1) < 0.4).astype(float), 64
    )
    mesh = marching_cubes(grid, 0.5)
    assert is_watertight(mesh)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - 0.4).max() < grid.voxel_size()


def test_marching_cubes_constant_grid_empty():
    grid = ScalarGrid.from_function(lambda p: np.zeros(len(p)), 16)
    mesh = marching_cubes(grid, 0.5)
    assert mesh.is_empty


def test_marching_cubes_box_watertight():
    def box_field(p):
        return (np.abs(p) < np.array([0.4, 0.3, 0.2])).all(axis=1).astype(float)

    mesh = marching_cubes(ScalarGrid.from_function(box_field, 40), 0.5)
    assert is_watertight(mesh)
    assert not mesh.is_empty


def test_marching_cubes_orientation_outward():
    grid = ScalarGrid.from_function(
        lambda p: (np.linalg.norm(p, axis=1) < 0.35).astype(float), 48
    )
    mesh = marching_cubes(grid, 0.5)
    assert winding_number(mesh, np.zeros((1, 3)))[0] > 0.99


def test_marching_cubes_resolution_check():
    with pytest.raises(ValidationError):
        marching_cubes(ScalarGrid(np.zeros((1, 1, 1)), -np.ones(3), np.ones(3)), 0.5)


def test_marching_cubes_roundtrip_occupancy_agreement():
    # re-query the extracted mesh's occupancy against the source field
    def field(p):
        return (np.linalg.norm(p, axis=1) < 0.38).astype(float)

    grid = ScalarGrid.from_function(field, 48)
    mesh = marching_cubes(grid, 0.5)
    pts = Rng(0).uniform((4000, 3), -0.55, 0.55)
    r = np.linalg.norm(pts, axis=1)
    clear = np.abs(r - 0.38) > grid.voxel_size()
    agreement = occupancy(mesh, pts[clear]) == field(pts[clear])
    assert agreement.mean() >= 0.99


# ---------------------------------------------------------------------------
# corpus


def test_make_corpus_counts_and_watertight():
    entries = make_corpus({"sphere": 2, "box": 2}, seed=0)
    assert len(entries) == 4
    assert [e.family for e in entries] == ["box", "box", "sphere", "sphere"]
    for e in entries:
        assert is_watertight(e.mesh)
        lo, hi = e.mesh.bounds()
        assert (hi - lo).max() <= 1.0 + 1e-9


def test_torus_centerline_occupied():
    torus = torus_mesh(0.3, 0.1)
    assert occupancy(torus, np.array([[0.3, 0.0, 0.0]]))[0] == 1.0
    assert is_watertight(torus)


def test_capsule_watertight_and_contains_axis():
    capsule = capsule_mesh(0.2, 0.3)
    assert is_watertight(capsule)
    assert occupancy(capsule, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.45]]))[0] == 1.0


def test_corpus_deterministic():
    a = make_corpus({"union": 1, "difference": 1}, seed=5, grid_res=48)
    b = make_corpus({"union": 1, "difference": 1}, seed=5, grid_res=48)
    for ea, eb in zip(a, b):
        np.testing.assert_array_equal(ea.mesh.vertices, eb.mesh.vertices)
        np.testing.assert_array_equal(ea.mesh.faces, eb.mesh.faces)


def test_corpus_csg_watertight_and_analytic():
    entries = make_corpus({"union": 1, "difference": 1}, seed=9, grid_res=64)
    for e in entries:
        assert is_watertight(e.mesh)
        pts = Rng(1).uniform((500, 3), -0.5, 0.5)
        inside = e.contains(pts)
        assert inside.dtype == bool


def test_corpus_unknown_family():
    with pytest.raises(ConfigError):
        make_corpus({"dodecahedron": 1}, seed=0)
