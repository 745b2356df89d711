"""Pillar grids, grid fusion, and detection on synthetic clusters."""

from __future__ import annotations

import math

import numpy as np
import pytest

from coopkit.errors import FrameMismatchError
from coopkit.geometry import PointCloud, Pose, Quaternion
from coopkit.bevfusion import (
    BEVGrid,
    Detection,
    DetectorParams,
    GridConfig,
    SIZE_TEMPLATES,
    classify_box_dims,
    cooperative_detect,
    detect_from_grid,
    late_fuse,
    max_fuse,
    pillarize,
    single_view_detect,
)
from coopkit.geometry import Box3D


def test_default_grid_is_512():
    cfg = GridConfig()
    assert cfg.nx == 512 and cfg.ny == 512


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(x_range=(10.0, -10.0))
    with pytest.raises(ValueError):
        GridConfig(cell_size=0.0)
    with pytest.raises(ValueError):
        GridConfig(cell_size=0.01)  # 15000 cells per axis


def test_pillarize_frozen_cell_index():
    cfg = GridConfig(cell_size=0.1, z_range=(-8.0, 0.0))
    cloud = PointCloud(np.array([[0.05, 0.05, -1.0]]), "infrastructure")
    grid = pillarize(cloud, cfg)
    assert grid.count[750, 750] == 1
    assert grid.count.sum() == 1
    assert grid.max_z[750, 750] == pytest.approx(-1.0)
    assert grid.mean_z[750, 750] == pytest.approx(-1.0)


def test_pillarize_range_is_half_open():
    cfg = GridConfig(x_range=(0.0, 10.0), y_range=(0.0, 10.0), z_range=(0.0, 4.0), cell_size=1.0)
    cloud = PointCloud(
        np.array([[10.0, 5.0, 1.0], [5.0, 10.0, 1.0], [5.0, 5.0, 4.0], [9.999, 9.999, 3.999]]),
        "infrastructure",
    )
    grid = pillarize(cloud, cfg)
    assert grid.count.sum() == 1
    assert grid.count[9, 9] == 1


def test_pillarize_channels():
    cfg = GridConfig(x_range=(0.0, 4.0), y_range=(0.0, 4.0), z_range=(0.0, 4.0), cell_size=2.0)
    cloud = PointCloud(
        np.array([[1.0, 1.0, 0.5], [1.2, 1.1, 1.5], [3.0, 3.0, 2.0]]),
        "infrastructure",
        intensity=np.array([10.0, 30.0, 5.0]),
    )
    grid = pillarize(cloud, cfg)
    assert grid.count[0, 0] == 2
    assert grid.max_z[0, 0] == pytest.approx(1.5)
    assert grid.mean_z[0, 0] == pytest.approx(1.0)
    assert grid.mean_intensity[0, 0] == pytest.approx(20.0)
    assert grid.count[1, 1] == 1
    assert np.all(np.isfinite(grid.max_z))


def test_max_fuse_counts_sum_values_max():
    cfg = GridConfig(x_range=(0.0, 2.0), y_range=(0.0, 2.0), z_range=(0.0, 4.0), cell_size=1.0)
    a = BEVGrid.empty(cfg, "infrastructure")
    b = BEVGrid.empty(cfg, "infrastructure")
    a.count[0, 0], b.count[0, 0] = 1, 2
    a.max_z[0, 0], b.max_z[0, 0] = 1.0, 2.0
    a.count[1, 1], b.count[1, 1] = 3, 2
    a.max_z[1, 1], b.max_z[1, 1] = 3.0, 2.0
    fused = max_fuse(a, b)
    assert fused.count[0, 0] == 3 and fused.count[1, 1] == 5
    assert fused.max_z[0, 0] == pytest.approx(2.0)
    assert fused.max_z[1, 1] == pytest.approx(3.0)


def test_max_fuse_empty_grid_is_identity():
    rng = np.random.default_rng(60)
    cfg = GridConfig(x_range=(-10.0, 10.0), y_range=(-10.0, 10.0), z_range=(-2.0, 2.0), cell_size=0.5)
    cloud = PointCloud(rng.uniform(-9, 9, (500, 3)) * [1, 1, 0.2], "infrastructure")
    g = pillarize(cloud, cfg)
    fused = max_fuse(g, BEVGrid.empty(cfg, "infrastructure"))
    assert np.array_equal(fused.count, g.count)
    assert np.allclose(fused.max_z, g.max_z)
    assert np.allclose(fused.mean_z, g.mean_z)


def test_max_fuse_negative_heights_survive_one_sided_cells():
    # A cell seen only by one grid must keep its observed (negative) height
    # rather than being flattened to the empty-cell placeholder 0.
    cfg = GridConfig(x_range=(0.0, 2.0), y_range=(0.0, 2.0), z_range=(-8.0, 0.0), cell_size=1.0)
    a = BEVGrid.empty(cfg, "infrastructure")
    b = BEVGrid.empty(cfg, "infrastructure")
    a.count[0, 0] = 4
    a.max_z[0, 0] = -1.5
    fused = max_fuse(a, b)
    assert fused.max_z[0, 0] == pytest.approx(-1.5)


def test_max_fuse_self_doubles_count_only():
    rng = np.random.default_rng(61)
    cfg = GridConfig(x_range=(-10.0, 10.0), y_range=(-10.0, 10.0), z_range=(-2.0, 2.0), cell_size=0.5)
    cloud = PointCloud(rng.uniform(-9, 9, (300, 3)) * [1, 1, 0.2], "infrastructure")
    g = pillarize(cloud, cfg)
    fused = max_fuse(g, g)
    assert np.array_equal(fused.count, 2 * g.count)
    assert np.allclose(fused.max_z, g.max_z)


def test_max_fuse_rejects_mismatch():
    cfg_a = GridConfig(cell_size=0.5)
    cfg_b = GridConfig(cell_size=1.0)
    with pytest.raises(ValueError):
        max_fuse(BEVGrid.empty(cfg_a, "infrastructure"), BEVGrid.empty(cfg_b, "infrastructure"))
    with pytest.raises(FrameMismatchError):
        max_fuse(BEVGrid.empty(cfg_a, "vehicle"), BEVGrid.empty(cfg_a, "infrastructure"))


# ---------------------------------------------------------------------------
# Detection on grids


def box_surface_cloud(rng, center, dims, yaw, n, frame="infrastructure"):
    """Noisy points spread over a box footprint, denser near the top face."""
    half = np.asarray(dims) / 2
    local = rng.uniform(-half, half, size=(n, 3))
    c, s = math.cos(yaw), math.sin(yaw)
    pts = np.stack(
        [
            center[0] + c * local[:, 0] - s * local[:, 1],
            center[1] + s * local[:, 0] + c * local[:, 1],
            center[2] + local[:, 2],
        ],
        axis=1,
    )
    return pts


def small_cfg():
    return GridConfig(x_range=(-20.0, 20.0), y_range=(-20.0, 20.0), z_range=(0.0, 4.0), cell_size=0.25)


def test_detect_single_cluster_center():
    rng = np.random.default_rng(62)
    cfg = small_cfg()
    center = np.array([4.0, -6.0, 0.8])
    pts = box_surface_cloud(rng, center, (4.5, 1.9, 1.6), 0.5, 400)
    dets = detect_from_grid(pillarize(PointCloud(pts, "infrastructure"), cfg))
    assert len(dets) == 1
    det = dets[0].box
    assert math.hypot(det.center[0] - center[0], det.center[1] - center[1]) < 0.3
    assert det.score is not None and det.score > 0.9
    assert dets[0].source == "cooperative"


def test_detect_respects_min_points_and_min_cells():
    cfg = GridConfig(x_range=(0.0, 10.0), y_range=(0.0, 10.0), z_range=(0.0, 4.0), cell_size=1.0)
    # Two points in one cell, single cells elsewhere.
    pts = np.array(
        [[1.5, 1.5, 1.0], [1.6, 1.5, 1.2], [5.5, 5.5, 1.0], [8.5, 2.5, 1.0]]
    )
    grid = pillarize(PointCloud(pts, "infrastructure"), cfg)
    assert detect_from_grid(grid, DetectorParams(min_points=2, min_cells=2)) == []
    dets = detect_from_grid(grid, DetectorParams(min_points=2, min_cells=1))
    assert len(dets) == 1


def test_detect_two_separated_objects():
    rng = np.random.default_rng(63)
    cfg = small_cfg()
    pts = np.vstack(
        [
            box_surface_cloud(rng, np.array([5.0, 5.0, 0.8]), (4.5, 1.9, 1.6), 0.2, 300),
            box_surface_cloud(rng, np.array([-8.0, -5.0, 0.9]), (0.6, 0.6, 1.7), 0.0, 80),
        ]
    )
    dets = detect_from_grid(pillarize(PointCloud(pts, "infrastructure"), cfg))
    assert len(dets) == 2
    cats = {d.box.category for d in dets}
    assert "car" in cats and "pedestrian" in cats


def test_detect_score_monotone_in_points():
    rng = np.random.default_rng(64)
    cfg = GridConfig(x_range=(-20.0, 20.0), y_range=(-20.0, 20.0), z_range=(0.0, 4.0), cell_size=0.5)
    scores = []
    for n in (60, 200, 800):
        pts = box_surface_cloud(rng, np.array([0.0, 0.0, 0.8]), (4.5, 1.9, 1.6), 0.3, n)
        dets = detect_from_grid(pillarize(PointCloud(pts, "infrastructure"), cfg))
        assert len(dets) == 1
        scores.append(dets[0].box.score)
    assert scores[0] < scores[1] < scores[2] < 1.0


def test_detect_deterministic_order():
    rng = np.random.default_rng(65)
    cfg = GridConfig(x_range=(-20.0, 20.0), y_range=(-20.0, 20.0), z_range=(0.0, 4.0), cell_size=0.5)
    pts = np.vstack(
        [
            box_surface_cloud(rng, np.array([5.0, 5.0, 0.8]), (4.5, 1.9, 1.6), 0.2, 500),
            box_surface_cloud(rng, np.array([-8.0, -5.0, 0.8]), (4.5, 1.9, 1.6), 1.0, 500),
        ]
    )
    cloud = PointCloud(pts, "infrastructure")
    a = detect_from_grid(pillarize(cloud, cfg))
    b = detect_from_grid(pillarize(cloud, cfg))
    assert len(a) == len(b) == 2
    for x, y in zip(a, b):
        assert np.array_equal(x.box.center, y.box.center)


def test_classify_templates_round_trip():
    for name, dims in SIZE_TEMPLATES.items():
        assert classify_box_dims(np.array(dims)) == name
    # Swapped BEV axes still classify by shape.
    assert classify_box_dims(np.array([1.9, 4.5, 1.6])) == "car"


# ---------------------------------------------------------------------------
# Late fusion


def det(x, y, score, source="vehicle", cat="car"):
    return Detection(
        Box3D(np.array([x, y, 0.8]), np.array([4.5, 1.9, 1.6]), 0.0, category=cat, score=score),
        source,
    )


def test_late_fuse_hand_trace():
    a = [det(0.0, 0.0, 0.9), det(10.0, 0.0, 0.3)]
    b = [det(0.4, 0.0, 0.5, source="infrastructure")]
    out = late_fuse(a, b, merge_dist=0.5)
    assert len(out) == 2
    best = max(out, key=lambda d: d.box.score)
    assert best.box.score == pytest.approx(0.9)
    assert best.box.center[0] == pytest.approx(0.0)  # higher-score geometry kept
    assert {round(d.box.center[0], 1) for d in out} == {0.0, 10.0}


def test_late_fuse_identical_sets_deduplicate():
    a = [det(0.0, 0.0, 0.8), det(6.0, 0.0, 0.6)]
    b = [det(0.0, 0.0, 0.8, source="infrastructure"), det(6.0, 0.0, 0.6, source="infrastructure")]
    out = late_fuse(a, b, merge_dist=2.0)
    assert len(out) == 2


def test_late_fuse_distant_detections_kept():
    a = [det(0.0, 0.0, 0.8)]
    b = [det(50.0, 0.0, 0.7, source="infrastructure")]
    out = late_fuse(a, b, merge_dist=2.0)
    assert len(out) == 2


def test_late_fuse_never_merges_same_view():
    a = [det(0.0, 0.0, 0.8), det(1.0, 0.0, 0.7)]
    out = late_fuse(a, [], merge_dist=5.0)
    assert len(out) == 2


# ---------------------------------------------------------------------------
# Cooperative detection


def test_cooperative_sees_weak_evidence_objects():
    """An object too sparse in each single view clears the fused threshold."""
    rng = np.random.default_rng(66)
    cfg = GridConfig(x_range=(-20.0, 20.0), y_range=(-20.0, 20.0), z_range=(0.0, 4.0), cell_size=0.5)
    center = np.array([3.0, 2.0, 0.8])
    # One point per cell per view: below min_points=2 alone, above fused.
    base = box_surface_cloud(rng, center, (4.5, 1.9, 1.6), 0.0, 40)
    cells = {}
    for p in base:
        key = (int(p[0] // 0.5), int(p[1] // 0.5))
        cells.setdefault(key, p)
    sparse = np.array(list(cells.values()))
    pose = Pose(Quaternion.from_yaw(0.2), np.array([1.0, -2.0, 0.0]), "vehicle", "infrastructure")
    infra = PointCloud(sparse, "infrastructure")
    vehicle = PointCloud(pose.invert().apply(sparse + rng.normal(scale=0.01, size=sparse.shape)), "vehicle")
    params = DetectorParams(min_points=2, min_cells=3)

    assert single_view_detect(infra, cfg, params, source="infrastructure") == []
    assert single_view_detect(vehicle, cfg, params, source="vehicle", pose_to_grid=pose) == []
    coop = cooperative_detect(vehicle, infra, pose, cfg, params)
    assert len(coop) == 1
    assert coop[0].source == "cooperative"
    assert math.hypot(coop[0].box.center[0] - center[0], coop[0].box.center[1] - center[1]) < 0.6
