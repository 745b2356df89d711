"""Command line entry points.

One executable, one subcommand per pipeline. Every run resolves its
configuration as defaults < TOML config file < explicit flags, then
writes a manifest recording the resolved values and input digests so a
result can be traced back to exactly what produced it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

import numpy as np

from coopkit import __version__
from coopkit.bevfusion import (
    DetectorParams,
    GridConfig,
    cooperative_detect,
    single_view_detect,
)
from coopkit.errors import CoopkitError
from coopkit.evaluation import (
    DetectionEvalConfig,
    evaluate_detection_3d,
    evaluate_detection_bev,
    evaluate_tracking,
)
from coopkit.dataset import (
    SynthSceneConfig,
    compute_stats,
    stratified_split,
    synth_scene,
)
from coopkit.geometry import Pose, Quaternion, box_corners, transform_points
from coopkit.openlabel import (
    from_kitti,
    load_openlabel,
    load_pcd,
    save_openlabel,
    save_pcd,
    to_kitti,
)
from coopkit.registration import IcpParams, coarse_from_gnss_imu, register_sequence
from coopkit.tracking import TrackerParams, track_sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

VEHICLE_DIR = "vehicle"
INFRA_DIR = "infrastructure"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunManifest:
    """Record of one invocation, written next to the primary output."""

    subcommand: str
    config: dict[str, Any]
    input_digests: dict[str, str]
    version: str = __version__
    wall_time_s: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "input_digests": dict(sorted(self.input_digests.items())),
            "version": self.version,
            "wall_time_s": self.wall_time_s,
        }

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _digest_inputs(paths: list[Path]) -> dict[str, str]:
    out: dict[str, str] = {}
    for p in paths:
        if p.is_dir():
            for child in sorted(p.rglob("*")):
                if child.is_file():
                    out[str(child)] = _sha256(child)
        elif p.is_file():
            out[str(p)] = _sha256(p)
        else:
            raise FileNotFoundError(f"input not found: {p}")
    return out


def _manifest_path(cfg: dict[str, Any]) -> Path:
    if cfg.get("manifest"):
        return Path(cfg["manifest"])
    out = Path(cfg["out"])
    if out.suffix:
        return out.parent / (out.stem + ".manifest.json")
    return out / "manifest.json"


# ---------------------------------------------------------------------------
# Config resolution

# Flags are registered with SUPPRESS defaults so the namespace contains
# only what the user actually typed; precedence then reads left to right.
_DEFAULTS: dict[str, dict[str, Any]] = {
    "convert": {"to": "kitti"},
    "split": {"ratios": "train=0.8,val=0.1,test=0.1", "tolerance": 0.02,
              "level": "frame", "seed": 0},
    "stats": {"csv": None, "plots": None},
    "register": {"stride": 10, "max_iterations": 50, "max_dist": 2.0,
                 "subsample": None},
    "detect": {"mode": "cooperative", "poses": None, "min_points": 2,
               "min_cells": 3, "cell_size": 0.293, "extent": 75.0,
               "stride": 1, "plot": None},
    "track": {"gate": 5.0, "max_age": 3, "min_hits": 2,
              "category_aware": True},
    "eval-detection": {"metric": "bev", "thresholds": "0.5,1,2,4",
                       "classes": None},
    "eval-tracking": {"match_dist": 2.0},
    "synth": {"seed": 0, "frames": 5, "objects": 6, "occlusion": False,
              "noise": 0.02, "ground_density": 0.0},
    "serve": {"host": "127.0.0.1", "port": 8000},
}


def _resolve_config(sub: str, args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(_DEFAULTS[sub])
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "rb") as f:
            document = tomllib.load(f)
        section = document.get(sub.replace("-", "_"), document.get(sub, {}))
        if not isinstance(section, dict):
            raise UsageError(f"config section for {sub!r} must be a table")
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in cfg and key not in ("out", "labels", "input",
                                              "detections", "tracks", "scene",
                                              "data_dir"):
                raise UsageError(f"unknown config key {key!r} for {sub}")
            cfg[key] = value
    for key, value in vars(args).items():
        if key in ("config", "func", "subcommand"):
            continue
        cfg[key] = value
    if config_path:
        cfg["config"] = str(config_path)
    return cfg


def _parse_ratios(raw: Any) -> dict[str, float]:
    if isinstance(raw, dict):
        return {str(k): float(v) for k, v in raw.items()}
    out: dict[str, float] = {}
    for part in str(raw).split(","):
        name, _, value = part.partition("=")
        if not name or not value:
            raise UsageError(f"bad ratio entry {part!r}, expected name=value")
        out[name.strip()] = float(value)
    return out


def _parse_floats(raw: Any) -> tuple[float, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(float(v) for v in raw)
    return tuple(float(v) for v in str(raw).split(","))


# ---------------------------------------------------------------------------
# Scene directory layout (written by synth, read by register/detect)


def _write_scene(scene, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / VEHICLE_DIR).mkdir(exist_ok=True)
    (out_dir / INFRA_DIR).mkdir(exist_ok=True)
    for i, (vc, ic) in enumerate(zip(scene.vehicle_clouds, scene.infra_clouds)):
        save_pcd(vc, out_dir / VEHICLE_DIR / f"{i:06d}.pcd")
        save_pcd(ic, out_dir / INFRA_DIR / f"{i:06d}.pcd")
    save_openlabel(scene.labels, out_dir / "labels.json")
    gnss = {
        "utm_zone": scene.gnss[0].utm_zone if scene.gnss else "32U",
        "frames": [
            {
                "vehicle_utm": s.vehicle_utm.tolist(),
                "infra_utm": s.infra_utm.tolist(),
                "imu_rotation": s.imu_rotation.components.tolist(),
            }
            for s in scene.gnss
        ],
    }
    _dump_json(gnss, out_dir / "gnss.json")
    _dump_json(_poses_to_wire(scene.true_poses), out_dir / "poses.json")


def _poses_to_wire(poses) -> dict[str, Any]:
    return {
        "frames": [
            {
                "rotation": p.rotation.components.tolist(),
                "translation": p.translation.tolist(),
                "source_frame": p.source_frame,
                "target_frame": p.target_frame,
            }
            for p in poses
        ]
    }


def _poses_from_wire(doc: dict[str, Any]) -> list[Pose]:
    poses = []
    for rec in doc["frames"]:
        poses.append(
            Pose(
                Quaternion(*rec["rotation"]),
                np.asarray(rec["translation"], dtype=float),
                source_frame=rec.get("source_frame", "vehicle"),
                target_frame=rec.get("target_frame", "infrastructure"),
            )
        )
    return poses


def _load_scene(scene_dir: Path):
    labels_path = scene_dir / "labels.json"
    if not labels_path.is_file():
        raise FileNotFoundError(f"no labels.json under {scene_dir}")
    labels = load_openlabel(labels_path)
    vehicle, infra = [], []
    for i, frame in enumerate(labels.frames):
        ts = frame.timestamp
        vehicle.append(load_pcd(scene_dir / VEHICLE_DIR / f"{i:06d}.pcd",
                                frame="vehicle", timestamp=ts))
        infra.append(load_pcd(scene_dir / INFRA_DIR / f"{i:06d}.pcd",
                              frame="infrastructure", timestamp=ts))
    gnss_path = scene_dir / "gnss.json"
    gnss = json.loads(gnss_path.read_text()) if gnss_path.is_file() else None
    return labels, vehicle, infra, gnss


def _coarse_poses(gnss: dict[str, Any]) -> list[Pose]:
    poses = []
    for rec in gnss["frames"]:
        poses.append(
            coarse_from_gnss_imu(
                np.asarray(rec["vehicle_utm"], dtype=float),
                np.asarray(rec["infra_utm"], dtype=float),
                Quaternion(*rec["imu_rotation"]),
            )
        )
    return poses


def _register_scene(vehicle, infra, gnss, stride: int,
                    params: IcpParams) -> list[Pose]:
    if gnss is None:
        raise ValueError("scene has no gnss.json; cannot build coarse poses")
    inits = _coarse_poses(gnss)
    return register_sequence(vehicle, infra, inits, anchor_stride=stride,
                             params=params)


def _dump_json(payload: dict[str, Any], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _frames_to_sequence(per_frame_boxes, template, seq_id: str):
    from coopkit.openlabel.model import Frame, Sequence

    frames = []
    for i, boxes in enumerate(per_frame_boxes):
        ts = template.frames[i].timestamp if i < len(template.frames) else None
        frames.append(Frame(index=i, timestamp=ts, boxes=list(boxes)))
    return Sequence(id=seq_id, frames=frames)


# ---------------------------------------------------------------------------
# Plot rendering (file output only; no display backend)


def _figure():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _render_histogram(path: Path, labels, values, title: str, xlabel: str):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(values)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _render_yaw_rose(path: Path, rose):
    plt = _figure()
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    n = len(rose)
    theta = [-np.pi + (k + 0.5) * 2 * np.pi / n for k in range(n)]
    ax.bar(theta, rose, width=2 * np.pi / n)
    ax.set_title("box heading distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _render_bev(path: Path, cloud_points: np.ndarray, boxes):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(8, 8))
    if len(cloud_points):
        ax.scatter(cloud_points[:, 0], cloud_points[:, 1], s=0.5,
                   c="#6688aa", linewidths=0)
    for box in boxes:
        c = box_corners(box)[:4, :2]
        loop = np.vstack([c, c[:1]])
        ax.plot(loop[:, 0], loop[:, 1], color="#cc3333", linewidth=1.0)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Subcommand handlers; each returns the list of input paths it digested.


def _cmd_convert(cfg: dict[str, Any]) -> list[Path]:
    src = Path(cfg["input"])
    out = Path(cfg["out"])
    if cfg["to"] == "kitti":
        seq = load_openlabel(src)
        to_kitti(seq, out)
    elif cfg["to"] == "openlabel":
        seq = from_kitti(src)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_openlabel(seq, out)
    else:
        raise UsageError(f"unknown conversion target {cfg['to']!r}")
    return [src]


def _cmd_split(cfg: dict[str, Any]) -> list[Path]:
    raw_labels = cfg["labels"]
    if isinstance(raw_labels, (str, Path)):
        raw_labels = [raw_labels]
    paths = [Path(p) for p in raw_labels]
    ratios = _parse_ratios(cfg["ratios"])
    if cfg["level"] == "sequence" or len(paths) > 1:
        source = [load_openlabel(p) for p in paths]
        level = "sequence"
    else:
        source = load_openlabel(paths[0])
        level = cfg["level"]
    result = stratified_split(source, ratios=ratios,
                              tolerance=float(cfg["tolerance"]),
                              level=level, seed=int(cfg["seed"]))
    _dump_json(result.to_dict(), Path(cfg["out"]))
    if not result.within_tolerance:
        if any(n == 0 for n in result.sizes.values()):
            empty = [s for s, n in result.sizes.items() if n == 0]
            logger.warning("too few units for the ratios: %s got nothing",
                           ", ".join(empty))
        else:
            logger.warning("split outside tolerance: divergence %.4f",
                           result.divergence)
    return paths


def _cmd_stats(cfg: dict[str, Any]) -> list[Path]:
    src = Path(cfg["labels"])
    report = compute_stats(load_openlabel(src))
    _dump_json(report.to_dict(), Path(cfg["out"]))
    if cfg.get("csv"):
        _stats_csv(report, Path(cfg["csv"]))
    if cfg.get("plots"):
        plots = Path(cfg["plots"])
        plots.mkdir(parents=True, exist_ok=True)
        hist = report.points_histogram
        _render_histogram(plots / "points_histogram.png",
                          list(hist), list(hist.values()),
                          "points per box", "lidar points")
        dist = report.distance_buckets
        _render_histogram(plots / "distance_histogram.png",
                          list(dist), list(dist.values()),
                          "box distance from origin", "meters")
        _render_yaw_rose(plots / "yaw_rose.png", report.yaw_rose)
    return [src]


def _stats_csv(report, path: Path):
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["section", "key", "value"])
        doc = report.to_dict()
        for section, value in sorted(doc.items()):
            if isinstance(value, dict):
                for key in sorted(value, key=str):
                    writer.writerow([section, key, value[key]])
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    writer.writerow([section, i, item])
            else:
                writer.writerow([section, "", value])


def _icp_params(cfg: dict[str, Any]) -> IcpParams:
    return IcpParams(
        max_iterations=int(cfg.get("max_iterations", 50)),
        correspondence_max_dist=float(cfg.get("max_dist", 2.0)),
        subsample=None if cfg.get("subsample") in (None, "")
        else int(cfg["subsample"]),
    )


def _cmd_register(cfg: dict[str, Any]) -> list[Path]:
    scene_dir = Path(cfg["scene"])
    _, vehicle, infra, gnss = _load_scene(scene_dir)
    poses = _register_scene(vehicle, infra, gnss, int(cfg["stride"]),
                            _icp_params(cfg))
    _dump_json(_poses_to_wire(poses), Path(cfg["out"]))
    return [scene_dir]


def _cmd_detect(cfg: dict[str, Any]) -> list[Path]:
    scene_dir = Path(cfg["scene"])
    labels, vehicle, infra, gnss = _load_scene(scene_dir)
    mode = cfg["mode"]
    if mode not in ("vehicle", "infrastructure", "cooperative"):
        raise UsageError(f"unknown detect mode {mode!r}")

    extent = float(cfg["extent"])
    grid = GridConfig(x_range=(-extent, extent), y_range=(-extent, extent),
                      cell_size=float(cfg["cell_size"]))
    params = DetectorParams(min_points=int(cfg["min_points"]),
                            min_cells=int(cfg["min_cells"]))

    inputs = [scene_dir]
    poses: list[Pose] | None = None
    if mode in ("vehicle", "cooperative"):
        if cfg.get("poses"):
            poses_path = Path(cfg["poses"])
            poses = _poses_from_wire(json.loads(poses_path.read_text()))
            inputs.append(poses_path)
        else:
            logger.info("no pose file given; registering scene first")
            poses = _register_scene(vehicle, infra, gnss, int(cfg["stride"]),
                                    _icp_params(cfg))
        if len(poses) != len(vehicle):
            raise ValueError(
                f"{len(poses)} poses for {len(vehicle)} frames")

    per_frame = []
    for i in range(len(vehicle)):
        if mode == "cooperative":
            dets = cooperative_detect(vehicle[i], infra[i], poses[i], grid,
                                      params)
        elif mode == "vehicle":
            moved = transform_points(vehicle[i], poses[i])
            dets = single_view_detect(moved, grid, params, source="vehicle")
        else:
            dets = single_view_detect(infra[i], grid, params,
                                      source="infrastructure")
        per_frame.append([d.box for d in dets])

    seq = _frames_to_sequence(per_frame, labels, f"detections-{mode}")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_openlabel(seq, out)
    if cfg.get("plot"):
        last = len(vehicle) - 1
        cloud = infra[last].points if mode != "vehicle" \
            else transform_points(vehicle[last], poses[last]).points
        _render_bev(Path(cfg["plot"]), cloud, per_frame[last])
    return inputs


def _cmd_track(cfg: dict[str, Any]) -> list[Path]:
    src = Path(cfg["detections"])
    seq = load_openlabel(src)
    params = TrackerParams(gate_dist=float(cfg["gate"]),
                           max_age=int(cfg["max_age"]),
                           min_hits=int(cfg["min_hits"]),
                           category_aware=bool(cfg["category_aware"]))
    tracked = track_sequence([f.boxes for f in seq.frames], params)
    out_seq = _frames_to_sequence(tracked, seq, f"{seq.id}-tracked")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    save_openlabel(out_seq, out)
    return [src]


def _aligned_frames(pred_seq, gt_seq) -> tuple[list, list]:
    if len(pred_seq.frames) != len(gt_seq.frames):
        raise ValueError(
            f"frame count mismatch: {len(pred_seq.frames)} predictions vs "
            f"{len(gt_seq.frames)} ground truth")
    return ([f.boxes for f in pred_seq.frames],
            [f.boxes for f in gt_seq.frames])


def _cmd_eval_detection(cfg: dict[str, Any]) -> list[Path]:
    det_path, gt_path = Path(cfg["detections"]), Path(cfg["labels"])
    preds, gts = _aligned_frames(load_openlabel(det_path),
                                 load_openlabel(gt_path))
    classes = None
    if cfg.get("classes"):
        raw = cfg["classes"]
        classes = tuple(raw) if isinstance(raw, (list, tuple)) \
            else tuple(s.strip() for s in str(raw).split(","))
    if cfg["metric"] == "bev":
        config = DetectionEvalConfig(
            distance_thresholds=_parse_floats(cfg["thresholds"]),
            classes=classes)
        report = evaluate_detection_bev(preds, gts, config)
    elif cfg["metric"] == "iou3d":
        config = DetectionEvalConfig(classes=classes)
        report = evaluate_detection_3d(preds, gts, config)
    else:
        raise UsageError(f"unknown metric {cfg['metric']!r}")
    _dump_json(report.to_dict(), Path(cfg["out"]))
    return [det_path, gt_path]


def _cmd_eval_tracking(cfg: dict[str, Any]) -> list[Path]:
    trk_path, gt_path = Path(cfg["tracks"]), Path(cfg["labels"])
    preds, gts = _aligned_frames(load_openlabel(trk_path),
                                 load_openlabel(gt_path))
    report = evaluate_tracking(preds, gts,
                               match_dist=float(cfg["match_dist"]))
    _dump_json(report.to_dict(), Path(cfg["out"]))
    return [trk_path, gt_path]


def _cmd_synth(cfg: dict[str, Any]) -> list[Path]:
    scene_cfg = SynthSceneConfig(
        seed=int(cfg["seed"]),
        n_frames=int(cfg["frames"]),
        n_objects=int(cfg["objects"]),
        force_occlusion=bool(cfg["occlusion"]),
        noise_sigma=float(cfg["noise"]),
        ground_points_per_m2=float(cfg["ground_density"]),
    )
    scene = synth_scene(scene_cfg)
    _write_scene(scene, Path(cfg["out"]))
    return []


def _cmd_serve(cfg: dict[str, Any]) -> list[Path]:
    data_dir = Path(cfg["data_dir"])
    if not data_dir.is_dir():
        raise FileNotFoundError(f"data directory not found: {data_dir}")

    # The server runs until killed, so its manifest goes out up front.
    manifest = RunManifest(subcommand="serve",
                           config=dict(sorted(cfg.items())),
                           input_digests={})
    manifest.write(Path(cfg.get("manifest") or data_dir / "serve.manifest.json"))

    import uvicorn

    from coopkit.service import create_app

    app = create_app(data_dir)
    uvicorn.run(app, host=str(cfg["host"]), port=int(cfg["port"]),
                log_level="warning")
    return [data_dir]


# ---------------------------------------------------------------------------
# Parser assembly


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="TOML config file; flags override it")
    sub.add_argument("--manifest", default=argparse.SUPPRESS,
                     help="manifest path (default: next to --out)")


def build_parser() -> _Parser:
    parser = _Parser(prog="coopkit",
                     description="cooperative perception toolkit")
    parser.add_argument("--version", action="version",
                        version=f"coopkit {__version__}")
    subs = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    def sub(name: str, handler: Callable, help_text: str):
        p = subs.add_parser(name, help=help_text, add_help=True,
                            argument_default=argparse.SUPPRESS)
        p.set_defaults(func=handler, subcommand=name)
        _add_common(p)
        return p

    p = sub("convert", _cmd_convert, "convert labels between formats")
    p.add_argument("--input", required=True, help="source file or directory")
    p.add_argument("--to", choices=["kitti", "openlabel"],
                   help="target format (default kitti)")
    p.add_argument("--out", required=True)

    p = sub("split", _cmd_split, "stratified train/val/test split")
    p.add_argument("--labels", required=True, nargs="+",
                   help="label file(s); several imply sequence level")
    p.add_argument("--ratios", help="name=value list, e.g. train=0.8,val=0.2")
    p.add_argument("--tolerance", type=float,
                   help="max class-proportion divergence (default 0.02)")
    p.add_argument("--level", choices=["frame", "sequence"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub("stats", _cmd_stats, "dataset statistics report")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write a flat CSV here")
    p.add_argument("--plots", help="directory for histogram images")

    p = sub("register", _cmd_register, "align vehicle clouds to infrastructure")
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--stride", type=int, help="ICP anchor stride (default 10)")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--max-dist", dest="max_dist", type=float,
                   help="correspondence gate in meters (default 2.0)")
    p.add_argument("--subsample", type=int)
    p.add_argument("--out", required=True)

    p = sub("detect", _cmd_detect, "run the BEV detector over a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--mode", choices=["vehicle", "infrastructure",
                                      "cooperative"])
    p.add_argument("--poses", help="pose file; omitted = register first")
    p.add_argument("--min-points", dest="min_points", type=int)
    p.add_argument("--min-cells", dest="min_cells", type=int)
    p.add_argument("--cell-size", dest="cell_size", type=float)
    p.add_argument("--extent", type=float, help="grid half extent in meters")
    p.add_argument("--stride", type=int, help="registration stride fallback")
    p.add_argument("--plot", help="BEV render of the last frame")
    p.add_argument("--out", required=True)

    p = sub("track", _cmd_track, "link detections into tracks")
    p.add_argument("--detections", required=True)
    p.add_argument("--gate", type=float)
    p.add_argument("--max-age", dest="max_age", type=int)
    p.add_argument("--min-hits", dest="min_hits", type=int)
    p.add_argument("--category-agnostic", dest="category_aware",
                   action="store_false", default=argparse.SUPPRESS)
    p.add_argument("--out", required=True)

    p = sub("eval-detection", _cmd_eval_detection, "detection AP report")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--metric", choices=["bev", "iou3d"])
    p.add_argument("--thresholds", help="BEV match distances, comma separated")
    p.add_argument("--classes", help="restrict to these classes")
    p.add_argument("--out", required=True)

    p = sub("eval-tracking", _cmd_eval_tracking, "CLEAR MOT / identity report")
    p.add_argument("--tracks", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--match-dist", dest="match_dist", type=float)
    p.add_argument("--out", required=True)

    p = sub("synth", _cmd_synth, "generate a synthetic scene directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--objects", type=int)
    p.add_argument("--occlusion", action="store_true",
                   default=argparse.SUPPRESS,
                   help="guarantee one object hidden from the vehicle")
    p.add_argument("--noise", type=float, help="per point sigma in meters")
    p.add_argument("--ground-density", dest="ground_density", type=float,
                   help="ground points per square meter (default 0)")
    p.add_argument("--out", required=True)

    p = sub("serve", _cmd_serve, "run the annotation HTTP service")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(out=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("COOPKIT_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    started = time.perf_counter()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version path
            return int(exc.code or 0)
        if getattr(args, "subcommand", None) is None:
            raise UsageError(parser.format_usage())
        cfg = _resolve_config(args.subcommand, args)
        inputs = args.func(cfg)
        if cfg.get("config"):
            inputs = inputs + [Path(cfg["config"])]
        if args.subcommand == "serve":
            return EXIT_OK
        manifest = RunManifest(
            subcommand=args.subcommand,
            config={k: v for k, v in sorted(cfg.items()) if k != "func"},
            input_digests=_digest_inputs(inputs),
        )
        manifest.wall_time_s = round(time.perf_counter() - started, 6)
        manifest.write(_manifest_path(cfg))
        return EXIT_OK
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (CoopkitError, ValueError, OSError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        logger.debug("data error", exc_info=True)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        logger.debug("internal error", exc_info=True)
        return EXIT_INTERNAL


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
