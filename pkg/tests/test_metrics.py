import math

import numpy as np
import pytest

from mar3d.autodiff import Rng
from mar3d.errors import ValidationError
from mar3d.geometry import TriangleMesh
from mar3d.geometry.corpus import box_mesh, icosphere
from mar3d.geometry.mesh import rotation_z
from mar3d.metrics import (
    EvalReport,
    MetricConfig,
    chamfer,
    chamfer_brute,
    evaluate_pair,
    f_score,
    icp_align,
    normal_consistency,
    volumetric_iou,
)


# ---------------------------------------------------------------------------
# chamfer


def test_chamfer_identity(np_rng):
    pts = np_rng.standard_normal((100, 3))
    assert chamfer(pts, pts.copy()) == 0.0


def test_chamfer_two_points():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0]])
    assert abs(chamfer(a, b) - 2.0) < 1e-12


def test_chamfer_symmetry(np_rng):
    a = np_rng.standard_normal((40, 3))
    b = np_rng.standard_normal((30, 3))
    assert abs(chamfer(a, b) - chamfer(b, a)) < 1e-12


def test_chamfer_matches_brute_force(np_rng):
    for _ in range(100):
        a = np_rng.standard_normal((50, 3))
        b = np_rng.standard_normal((60, 3))
        assert abs(chamfer(a, b) - chamfer_brute(a, b)) < 1e-6


def test_chamfer_kdtree_vs_brute_500(np_rng):
    a = np_rng.standard_normal((500, 3))
    b = np_rng.standard_normal((500, 3))
    assert abs(chamfer(a, b) - chamfer_brute(a, b)) < 1e-6


def test_chamfer_empty_rejected():
    with pytest.raises(ValidationError):
        chamfer(np.zeros((0, 3)), np.zeros((5, 3)))


# ---------------------------------------------------------------------------
# f-score


def test_f_score_identity(np_rng):
    pts = np_rng.standard_normal((50, 3))
    assert f_score(pts, pts.copy(), 0.02) == 1.0


def test_f_score_disjoint():
    a = np.zeros((10, 3))
    b = np.ones((10, 3)) * 10
    assert f_score(a, b, 0.02) == 0.0


def test_f_score_outlier_hand_count():
    gt = np.arange(27, dtype=np.float64).reshape(9, 3) * 0.001
    pred = np.concatenate([gt, [[100.0, 100.0, 100.0]]], axis=0)
    # P = 9/10, R = 1 -> F = 18/19
    assert abs(f_score(pred, gt, 0.02) - 18.0 / 19.0) < 1e-12


def test_f_score_monotone_in_tau(np_rng):
    a = np_rng.standard_normal((200, 3)) * 0.1
    b = np_rng.standard_normal((200, 3)) * 0.1
    taus = [0.2, 0.1, 0.05, 0.02, 0.01]
    scores = [f_score(a, b, t) for t in taus]
    assert all(s1 >= s2 for s1, s2 in zip(scores, scores[1:]))


def test_f_score_tau_validation():
    with pytest.raises(ValidationError):
        f_score(np.zeros((3, 3)), np.zeros((3, 3)), 0.0)


# ---------------------------------------------------------------------------
# normal consistency


def _plane(normal_axis: int, offset: float = 0.0) -> TriangleMesh:
    # unit square in the plane orthogonal to normal_axis
    axes = [i for i in range(3) if i != normal_axis]
    verts = np.zeros((4, 3))
    verts[:, axes[0]] = [-0.5, 0.5, 0.5, -0.5]
    verts[:, axes[1]] = [-0.5, -0.5, 0.5, 0.5]
    verts[:, normal_axis] = offset
    return TriangleMesh(verts, np.array([[0, 1, 2], [0, 2, 3]], np.int32))


def test_normal_consistency_self():
    mesh = icosphere(0.5, 2)
    assert abs(normal_consistency(mesh, mesh, 2000, Rng(0)) - 1.0) < 1e-6


def test_normal_consistency_parallel_planes():
    a = _plane(2, 0.0)
    b = _plane(2, 0.3)
    assert abs(normal_consistency(a, b, 2000, Rng(1)) - 1.0) < 1e-6


def test_normal_consistency_orthogonal_planes():
    a = _plane(2)
    b = _plane(0)
    assert abs(normal_consistency(a, b, 4000, Rng(2))) < 0.02


# ---------------------------------------------------------------------------
# volumetric IoU


def test_iou_self():
    cube = box_mesh((0.5, 0.5, 0.5))
    assert volumetric_iou(cube, cube, 20000, Rng(0)) == 1.0


def test_iou_disjoint():
    a = box_mesh((0.2, 0.2, 0.2)).transformed(translation=(-0.5, 0, 0))
    b = box_mesh((0.2, 0.2, 0.2)).transformed(translation=(0.5, 0, 0))
    assert volumetric_iou(a, b, 5000, Rng(1)) == 0.0


def test_iou_half_shifted_box():
    a = box_mesh((0.5, 0.5, 0.5))
    b = a.transformed(translation=(0.5, 0.0, 0.0))
    iou = volumetric_iou(a, b, 100_000, Rng(2))
    assert abs(iou - 1.0 / 3.0) < 0.01


def test_iou_empty_meshes():
    empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int32))
    cube = box_mesh((0.3, 0.3, 0.3))
    assert volumetric_iou(empty, empty, 100, Rng(0)) == 1.0
    assert volumetric_iou(empty, cube, 100, Rng(0)) == 0.0


# ---------------------------------------------------------------------------
# ICP


def test_icp_identity(np_rng):
    pts = np_rng.standard_normal((200, 3))
    rotation, translation, aligned = icp_align(pts, pts.copy())
    np.testing.assert_allclose(rotation, np.eye(3), atol=1e-6)
    np.testing.assert_allclose(translation, 0.0, atol=1e-6)
    np.testing.assert_allclose(aligned, pts, atol=1e-6)


def test_icp_recovers_small_rotation(np_rng):
    src = np_rng.standard_normal((500, 3))
    angle = math.radians(10)
    dst = src @ rotation_z(angle).T + np_rng.standard_normal((500, 3)) * 1e-4
    rotation, _, aligned = icp_align(src, dst)
    recovered = math.degrees(math.atan2(rotation[1, 0], rotation[0, 0]))
    assert abs(recovered - 10.0) < 0.5
    assert np.sqrt(((aligned - dst) ** 2).sum(axis=1)).mean() < 1e-3


def test_icp_transform_is_rigid(np_rng):
    for trial in range(5):
        src = np_rng.standard_normal((100, 3))
        dst = np_rng.standard_normal((120, 3))
        rotation, _, _ = icp_align(src, dst, max_iters=10)
        np.testing.assert_allclose(rotation.T @ rotation, np.eye(3), atol=1e-6)
        assert abs(np.linalg.det(rotation) - 1.0) < 1e-6


def test_icp_needs_three_points():
    with pytest.raises(ValidationError):
        icp_align(np.zeros((2, 3)), np.zeros((5, 3)))


# ---------------------------------------------------------------------------
# evaluate_pair


def test_evaluate_pair_self():
    mesh = icosphere(0.5, 2)
    report = evaluate_pair(mesh, mesh, MetricConfig(n_samples=2000, iou_samples=5000), Rng(0))
    assert report.f_score == 1.0
    assert report.chamfer < 1e-2  # same surface, different sample draws
    assert report.normal_consistency > 0.98
    assert report.iou > 0.98


def test_evaluate_pair_icp_improves_chamfer():
    mesh = box_mesh((0.5, 0.3, 0.2))
    rotated = mesh.transformed(rotation=rotation_z(math.radians(15)))
    rng = Rng(1)
    pred_pts, _ = __import__("mar3d.geometry", fromlist=["sample_surface"]).sample_surface(
        rotated, 2000, rng.spawn(0)
    )
    gt_pts, _ = __import__("mar3d.geometry", fromlist=["sample_surface"]).sample_surface(
        mesh, 2000, rng.spawn(1)
    )
    before = chamfer(pred_pts, gt_pts)
    _, _, aligned = icp_align(pred_pts, gt_pts)
    after = chamfer(aligned, gt_pts)
    assert after < before


def test_eval_report_json_roundtrip():
    report = EvalReport(0.9, 0.01, 0.85, 0.8, 1000, 0.02)
    again = EvalReport.from_json(report.to_json())
    assert again == report
