"""File format round trips and timestamp matching."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from helpers import random_sequence, sequences_equal
from coopkit.errors import ParseError
from coopkit.geometry import Box3D, PointCloud
from coopkit.openlabel import (
    Frame,
    Sequence,
    from_kitti,
    load_openlabel,
    load_pcd,
    match_timestamps,
    save_openlabel,
    save_pcd,
    to_kitti,
)

FIXTURES = Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------------------
# OpenLABEL JSON


def test_fixture_round_trip_identity():
    path = FIXTURES / "openlabel_two_frames.json"
    original = json.loads(path.read_text())
    seq = load_openlabel(path)
    assert save_openlabel(seq) == original


def test_fixture_content():
    seq = load_openlabel(FIXTURES / "openlabel_two_frames.json")
    assert seq.id == "fixture-two-frames"
    assert len(seq.frames) == 2
    f0 = seq.frames[0]
    assert f0.timestamp == 1650000000000000
    assert f0.properties_extra["weather"] == "sunny"
    assert len(f0.boxes) == 2
    car = f0.boxes[0]
    assert car.category == "car" and car.track_id == 0
    assert car.yaw == pytest.approx(math.pi / 2, abs=1e-12)
    assert car.attributes == {"occluded": False, "num_lidar_points": 412}
    ped = f0.boxes[1]
    assert ped.category == "pedestrian" and ped.track_id == 5
    assert len(seq.frames[1].boxes) == 1


def test_random_sequences_round_trip(tmp_path):
    rng = np.random.default_rng(30)
    for i in range(30):
        seq = random_sequence(rng)
        path = tmp_path / f"seq_{i}.json"
        save_openlabel(seq, path)
        loaded = load_openlabel(path)
        assert sequences_equal(seq, loaded)
        assert save_openlabel(loaded) == json.loads(path.read_text())


def test_save_assigns_keys_for_anonymous_boxes():
    seq = Sequence(id="dets")
    frame = Frame(index=0, timestamp=0)
    frame.boxes.append(Box3D(np.zeros(3), np.ones(3), 0.0, category="car", score=0.9))
    frame.boxes.append(Box3D(np.ones(3), np.ones(3), 0.0, category="bus", score=0.4))
    seq.frames.append(frame)
    out = save_openlabel(seq)
    loaded = load_openlabel(out)
    assert len(loaded.frames[0].boxes) == 2
    assert {b.category for b in loaded.frames[0].boxes} == {"car", "bus"}
    assert loaded.frames[0].boxes[0].score == pytest.approx(0.9)


@pytest.mark.parametrize(
    "mutate, path_hint",
    [
        (lambda d: d.pop("openlabel"), "openlabel"),
        (lambda d: d["openlabel"]["frames"].update({"x": {}}), "frames.x"),
        (
            lambda d: d["openlabel"]["frames"]["0"]["objects"]["0"]["object_data"]["cuboid"][0].update(
                {"val": [1, 2, 3]}
            ),
            "cuboid[0].val",
        ),
        (
            lambda d: d["openlabel"]["frames"]["0"]["objects"]["0"]["object_data"]["cuboid"][0]["val"].__setitem__(
                slice(3, 7), [0.0, 0.0, 0.0, 0.0]
            ),
            "cuboid[0].val",
        ),
        (lambda d: d["openlabel"]["objects"]["0"].update({"type": "dragon"}), "objects.0"),
        (
            lambda d: d["openlabel"]["frames"]["0"]["frame_properties"].update({"timestamp": 1.5}),
            "timestamp",
        ),
        (lambda d: d["openlabel"]["frames"]["0"]["objects"].update({"9": {}}), "objects.9"),
    ],
)
def test_parse_errors_name_the_path(mutate, path_hint):
    doc = json.loads((FIXTURES / "openlabel_two_frames.json").read_text())
    mutate(doc)
    with pytest.raises(ParseError) as err:
        load_openlabel(doc)
    assert path_hint in str(err.value)


def test_invalid_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"openlabel": ')
    with pytest.raises(ParseError) as err:
        load_openlabel(bad)
    assert "bad.json" in str(err.value)


# ---------------------------------------------------------------------------
# PCD


def random_cloud(rng, n=200, intensity=True):
    return PointCloud(
        rng.uniform(-80, 80, (n, 3)),
        "lidar",
        intensity=rng.uniform(0, 255, n) if intensity else None,
    )


def test_pcd_binary_round_trip(tmp_path):
    rng = np.random.default_rng(31)
    cloud = random_cloud(rng)
    path = tmp_path / "c.pcd"
    save_pcd(cloud, path, binary=True)
    back = load_pcd(path)
    assert np.allclose(back.points, cloud.points, atol=1e-4)
    assert np.allclose(back.intensity, cloud.intensity, atol=1e-4)


def test_pcd_ascii_binary_agree(tmp_path):
    rng = np.random.default_rng(32)
    cloud = random_cloud(rng)
    pa, pb = tmp_path / "a.pcd", tmp_path / "b.pcd"
    save_pcd(cloud, pa, binary=False)
    save_pcd(cloud, pb, binary=True)
    a, b = load_pcd(pa), load_pcd(pb)
    # Both encodings store float32, so they agree exactly.
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.intensity, b.intensity)
    # A second ascii hop changes nothing.
    save_pcd(a, pa, binary=False)
    assert np.array_equal(load_pcd(pa).points, a.points)


def test_pcd_without_intensity(tmp_path):
    rng = np.random.default_rng(33)
    cloud = random_cloud(rng, intensity=False)
    path = tmp_path / "c.pcd"
    save_pcd(cloud, path, binary=True)
    back = load_pcd(path)
    assert back.intensity is None
    assert len(back) == len(cloud)


def test_pcd_nan_rows_dropped(tmp_path, caplog):
    pts = np.array([[0.0, 0.0, 0.0], [np.nan, 1.0, 2.0], [3.0, 4.0, 5.0], [1.0, np.nan, 0.0]])
    path = tmp_path / "nan.pcd"
    save_pcd(PointCloud(pts, "lidar"), path, binary=True)
    with caplog.at_level(logging.WARNING):
        back = load_pcd(path)
    assert len(back) == 2
    assert "2" in caplog.text


def test_pcd_empty_cloud(tmp_path):
    path = tmp_path / "empty.pcd"
    save_pcd(PointCloud(np.empty((0, 3)), "lidar"), path, binary=True)
    assert len(load_pcd(path)) == 0


def test_pcd_truncated_binary(tmp_path):
    rng = np.random.default_rng(34)
    path = tmp_path / "t.pcd"
    save_pcd(random_cloud(rng, n=50), path, binary=True)
    data = path.read_bytes()
    path.write_bytes(data[:-17])
    with pytest.raises(ParseError) as err:
        load_pcd(path)
    assert "truncated" in str(err.value)


def test_pcd_bad_header(tmp_path):
    path = tmp_path / "h.pcd"
    path.write_bytes(b"VERSION 0.7\nFIELDS a b c\nPOINTS 0\nDATA ascii\n")
    with pytest.raises(ParseError):
        load_pcd(path)


# ---------------------------------------------------------------------------
# KITTI


def test_kitti_numeric_round_trip(tmp_path):
    rng = np.random.default_rng(35)
    seq = random_sequence(rng, n_frames=4)
    to_kitti(seq, tmp_path)
    back = from_kitti(tmp_path)
    assert len(back.frames) == len(seq.frames)
    for fa, fb in zip(seq.frames, back.frames):
        assert len(fa.boxes) == len(fb.boxes)
        for a, b in zip(fa.boxes, fb.boxes):
            assert np.allclose(a.center, b.center, atol=1e-6)
            assert np.allclose(a.dimensions, b.dimensions, atol=1e-6)
            assert abs(math.remainder(a.yaw - b.yaw, 2 * math.pi)) < 1e-6
            if a.score is not None:
                assert b.score == pytest.approx(a.score, abs=1e-6)


def test_kitti_category_map(tmp_path):
    seq = Sequence(id="cats")
    frame = Frame(index=0)
    for cat in ("car", "van", "truck", "pedestrian", "bicycle"):
        frame.boxes.append(Box3D(np.zeros(3), np.ones(3), 0.0, category=cat))
    seq.frames.append(frame)
    to_kitti(seq, tmp_path)
    text = (tmp_path / "000000.txt").read_text()
    for name in ("Car", "Van", "Truck", "Pedestrian", "Cyclist"):
        assert name in text
    back = from_kitti(tmp_path)
    assert [b.category for b in back.frames[0].boxes] == ["car", "van", "truck", "pedestrian", "bicycle"]


def test_kitti_lossy_warned(tmp_path, caplog):
    seq = Sequence(id="lossy")
    frame = Frame(index=0)
    frame.boxes.append(Box3D(np.zeros(3), np.ones(3), 0.0, category="motorcycle", track_id=4))
    seq.frames.append(frame)
    with caplog.at_level(logging.WARNING):
        to_kitti(seq, tmp_path)
    assert "KITTI" in caplog.text
    back = from_kitti(tmp_path)
    assert back.frames[0].boxes[0].category == "other"
    assert back.frames[0].boxes[0].track_id is None


def test_kitti_rejects_garbage(tmp_path):
    (tmp_path / "000000.txt").write_text("Car 0 0 0\n")
    with pytest.raises(ParseError):
        from_kitti(tmp_path)


# ---------------------------------------------------------------------------
# Timestamp matching


def test_match_timestamps_frozen_example():
    ms = 1000
    report = match_timestamps([0, 100 * ms, 200 * ms], [10 * ms, 110 * ms, 190 * ms], max_delta_us=50 * ms)
    assert report.pairs == [(0, 0), (1, 1), (2, 2)]
    assert report.mean_abs_delta_us == pytest.approx(10 * ms)
    assert report.mean_signed_delta_us == pytest.approx((-10 * ms - 10 * ms + 10 * ms) / 3)
    assert report.max_abs_delta_us == 10 * ms
    assert report.unmatched_vehicle == []


def test_match_timestamps_rejects_far_pairs():
    report = match_timestamps([0, 100_000], [500_000], max_delta_us=50_000)
    assert report.pairs == []
    assert report.unmatched_vehicle == [0, 1]


def test_match_timestamps_nearest_oracle():
    rng = np.random.default_rng(36)
    for _ in range(50):
        v = np.sort(rng.integers(0, 10**7, size=rng.integers(1, 30)))
        t = rng.integers(0, 10**7, size=rng.integers(1, 30))
        max_dt = int(rng.integers(10**3, 10**6))
        report = match_timestamps(v, t, max_dt)
        matched = dict(report.pairs)
        for vi, ts in enumerate(v):
            best = int(np.argmin(np.abs(t.astype(np.int64) - int(ts))))
            best_delta = abs(int(t[best]) - int(ts))
            if best_delta > max_dt:
                assert vi in report.unmatched_vehicle
            else:
                assert vi in matched
                got_delta = abs(int(t[matched[vi]]) - int(ts))
                assert got_delta == best_delta


def test_match_timestamps_empty():
    report = match_timestamps([], [1, 2], 100)
    assert report.pairs == [] and report.unmatched_vehicle == []
    report = match_timestamps([1, 2], [], 100)
    assert report.unmatched_vehicle == [0, 1]
