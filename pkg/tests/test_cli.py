"""End-to-end command line tests driven through main()."""

from __future__ import annotations

import json

import numpy as np
import pytest

from coopkit.cli import main
from coopkit.openlabel import load_openlabel, save_openlabel
from helpers import random_sequence


@pytest.fixture
def labels_file(tmp_path):
    seq = random_sequence(np.random.default_rng(11), n_frames=6)
    path = tmp_path / "labels.json"
    save_openlabel(seq, path)
    return path


def read_json(path):
    return json.loads(path.read_text())


class TestUsage:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "subcommand" in capsys.readouterr().out

    def test_unknown_flag(self, capsys):
        assert main(["stats", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "usage" in err

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand(self, capsys):
        assert main([]) == 1

    def test_missing_required_flag(self, capsys):
        assert main(["stats"]) == 1
        assert "--labels" in capsys.readouterr().err

    def test_subcommand_help(self, capsys):
        assert main(["synth", "--help"]) == 0
        assert "--seed" in capsys.readouterr().out


class TestDataErrors:
    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["stats", "--labels", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "out.json")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_malformed_labels(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["stats", "--labels", str(bad),
                     "--out", str(tmp_path / "out.json")])
        assert code == 2

    def test_scene_without_labels(self, tmp_path):
        code = main(["register", "--scene", str(tmp_path),
                     "--out", str(tmp_path / "poses.json")])
        assert code == 2


class TestConvert:
    def test_kitti_round_trip_preserves_geometry(self, labels_file, tmp_path):
        kitti_dir = tmp_path / "kitti"
        assert main(["convert", "--input", str(labels_file),
                     "--to", "kitti", "--out", str(kitti_dir)]) == 0
        assert list(kitti_dir.glob("*.txt"))

        back = tmp_path / "back.json"
        assert main(["convert", "--input", str(kitti_dir),
                     "--to", "openlabel", "--out", str(back)]) == 0

        orig = load_openlabel(labels_file)
        rt = load_openlabel(back)
        assert len(rt.frames) == len(orig.frames)
        for fo, fr in zip(orig.frames, rt.frames):
            assert len(fo.boxes) == len(fr.boxes)
            ours = sorted(fo.boxes, key=lambda b: tuple(b.center))
            theirs = sorted(fr.boxes, key=lambda b: tuple(b.center))
            for bo, br in zip(ours, theirs):
                assert np.allclose(bo.center, br.center, atol=1e-6)
                assert np.allclose(bo.dimensions, br.dimensions, atol=1e-6)
                assert bo.yaw == pytest.approx(br.yaw, abs=1e-6)


class TestSplitStats:
    def test_split_writes_report(self, labels_file, tmp_path):
        out = tmp_path / "split.json"
        assert main(["split", "--labels", str(labels_file),
                     "--ratios", "train=0.5,val=0.5",
                     "--out", str(out)]) == 0
        doc = read_json(out)
        assert set(doc["sizes"]) == {"train", "val"}
        assert sum(doc["sizes"].values()) == 6

    def test_stats_with_csv_and_plots(self, labels_file, tmp_path):
        out = tmp_path / "stats.json"
        csv_path = tmp_path / "stats.csv"
        plots = tmp_path / "plots"
        assert main(["stats", "--labels", str(labels_file),
                     "--out", str(out), "--csv", str(csv_path),
                     "--plots", str(plots)]) == 0
        doc = read_json(out)
        assert doc["n_frames"] == 6
        assert csv_path.read_text().startswith("section,key,value")
        for name in ("points_histogram.png", "distance_histogram.png",
                     "yaw_rose.png"):
            assert (plots / name).stat().st_size > 1000


class TestManifest:
    def test_repeat_runs_differ_only_in_wall_time(self, labels_file, tmp_path):
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        man_a, man_b = tmp_path / "ma.json", tmp_path / "mb.json"
        for out, man in ((out_a, man_a), (out_b, man_b)):
            assert main(["stats", "--labels", str(labels_file),
                         "--out", str(out), "--manifest", str(man)]) == 0
        a, b = read_json(man_a), read_json(man_b)
        assert a["input_digests"] == b["input_digests"]
        assert a["subcommand"] == "stats"
        assert a["version"]
        a.pop("wall_time_s")
        b.pop("wall_time_s")
        # Output paths differ by construction; everything else matches.
        a["config"].pop("out")
        b["config"].pop("out")
        a["config"].pop("manifest")
        b["config"].pop("manifest")
        assert a == b

    def test_default_manifest_path(self, labels_file, tmp_path):
        out = tmp_path / "report.json"
        assert main(["stats", "--labels", str(labels_file),
                     "--out", str(out)]) == 0
        assert (tmp_path / "report.manifest.json").is_file()

    def test_config_file_flags_win(self, labels_file, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text("[split]\nseed = 3\ntolerance = 0.5\n")
        out = tmp_path / "split.json"
        assert main(["split", "--labels", str(labels_file),
                     "--config", str(config), "--seed", "9",
                     "--out", str(out)]) == 0
        manifest = read_json(tmp_path / "split.manifest.json")
        assert manifest["config"]["seed"] == 9
        assert manifest["config"]["tolerance"] == 0.5
        assert str(config) in manifest["input_digests"]

    def test_unknown_config_key_rejected(self, labels_file, tmp_path, capsys):
        config = tmp_path / "run.toml"
        config.write_text("[split]\nbanana = 1\n")
        assert main(["split", "--labels", str(labels_file),
                     "--config", str(config),
                     "--out", str(tmp_path / "o.json")]) == 1


class TestPipeline:
    def test_synth_deterministic(self, tmp_path):
        args = ["synth", "--seed", "7", "--frames", "2", "--objects", "3"]
        for name in ("one", "two"):
            assert main(args + ["--out", str(tmp_path / name)]) == 0
        for rel in ("labels.json", "vehicle/000000.pcd",
                    "infrastructure/000001.pcd", "gnss.json", "poses.json"):
            assert (tmp_path / "one" / rel).read_bytes() == \
                (tmp_path / "two" / rel).read_bytes()

    def test_full_pipeline(self, tmp_path):
        scene = tmp_path / "scene"
        assert main(["synth", "--seed", "7", "--frames", "3",
                     "--objects", "4", "--out", str(scene)]) == 0
        assert (scene / "manifest.json").is_file()

        poses = tmp_path / "poses.json"
        assert main(["register", "--scene", str(scene), "--stride", "2",
                     "--out", str(poses)]) == 0
        pose_doc = read_json(poses)
        assert len(pose_doc["frames"]) == 3

        # Registration should land close to the generated truth.
        truth = read_json(scene / "poses.json")
        for est, ref in zip(pose_doc["frames"], truth["frames"]):
            assert np.allclose(est["translation"], ref["translation"],
                               atol=0.3)

        det = tmp_path / "det.json"
        plot = tmp_path / "bev.png"
        assert main(["detect", "--scene", str(scene),
                     "--mode", "cooperative", "--poses", str(poses),
                     "--plot", str(plot), "--out", str(det)]) == 0
        det_seq = load_openlabel(det)
        assert sum(len(f.boxes) for f in det_seq.frames) > 0
        assert all(b.score is not None
                   for f in det_seq.frames for b in f.boxes)
        assert plot.stat().st_size > 1000

        report = tmp_path / "ap.json"
        assert main(["eval-detection", "--detections", str(det),
                     "--labels", str(scene / "labels.json"),
                     "--out", str(report)]) == 0
        doc = read_json(report)
        assert doc["mean_ap"] > 0.3
        assert (tmp_path / "ap.manifest.json").is_file()

        tracks = tmp_path / "tracks.json"
        assert main(["track", "--detections", str(det), "--min-hits", "1",
                     "--out", str(tracks)]) == 0
        track_seq = load_openlabel(tracks)
        ids = {b.track_id for f in track_seq.frames for b in f.boxes}
        assert ids and None not in ids

        mot = tmp_path / "mot.json"
        assert main(["eval-tracking", "--tracks", str(tracks),
                     "--labels", str(scene / "labels.json"),
                     "--match-dist", "2.0", "--out", str(mot)]) == 0
        assert "mota" in read_json(mot)

    def test_detect_auto_registers_without_poses(self, tmp_path):
        scene = tmp_path / "scene"
        assert main(["synth", "--seed", "3", "--frames", "2",
                     "--objects", "3", "--out", str(scene)]) == 0
        det = tmp_path / "det.json"
        assert main(["detect", "--scene", str(scene),
                     "--mode", "cooperative", "--out", str(det)]) == 0
        assert read_json(det)["openlabel"]["frames"]

    def test_vehicle_and_infrastructure_modes(self, tmp_path):
        scene = tmp_path / "scene"
        assert main(["synth", "--seed", "5", "--frames", "1",
                     "--objects", "2", "--out", str(scene)]) == 0
        for mode in ("vehicle", "infrastructure"):
            det = tmp_path / f"{mode}.json"
            assert main(["detect", "--scene", str(scene), "--mode", mode,
                         "--out", str(det)]) == 0
            assert det.is_file()
