"""Descriptive statistics over a labeled sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..openlabel.model import Sequence

__all__ = ["StatsReport", "compute_stats"]

# Right-open point-count buckets; the last is unbounded.
DEFAULT_POINT_BINS = (1, 21, 51, 101, 201, 501, 1001, 5001)
DISTANCE_BIN_WIDTH = 10.0
YAW_BINS = 16


@dataclass(frozen=True)
class StatsReport:
    """Aggregate label statistics.

    Point counts come from the ``num_lidar_points`` box attribute;
    boxes without it are tallied under ``points_unknown``. Track length
    is the polyline length of a track's center across frames, in
    meters. Distances are BEV range from the coordinate origin.
    """

    n_frames: int
    n_boxes: int
    n_tracks: int
    class_counts: dict[str, int]
    points_histogram: dict[str, int]
    points_mean: float
    points_unknown: int
    objects_per_frame: dict[int, int]
    objects_per_frame_mean: float
    track_length_avg: dict[str, float]
    track_length_max: dict[str, float]
    yaw_rose: list[int]
    distance_buckets: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "n_boxes": self.n_boxes,
            "n_tracks": self.n_tracks,
            "class_counts": dict(self.class_counts),
            "points_histogram": dict(self.points_histogram),
            "points_mean": self.points_mean,
            "points_unknown": self.points_unknown,
            "objects_per_frame": {
                str(k): v for k, v in self.objects_per_frame.items()
            },
            "objects_per_frame_mean": self.objects_per_frame_mean,
            "track_length_avg": dict(self.track_length_avg),
            "track_length_max": dict(self.track_length_max),
            "yaw_rose": list(self.yaw_rose),
            "distance_buckets": dict(self.distance_buckets),
        }


def _point_bin_label(count: int, bins: tuple[int, ...]) -> str:
    if count < bins[0]:
        return f"<{bins[0]}"
    for lo, hi in zip(bins, bins[1:]):
        if lo <= count < hi:
            return f"{lo}-{hi - 1}"
    return f">={bins[-1]}"


def compute_stats(
    seq: Sequence, point_bins: tuple[int, ...] = DEFAULT_POINT_BINS
) -> StatsReport:
    """Count, bucket, and measure everything reportable about a sequence."""
    class_counts: dict[str, int] = {}
    points_histogram = {_point_bin_label(0, point_bins): 0}
    for lo, hi in zip(point_bins, point_bins[1:]):
        points_histogram[f"{lo}-{hi - 1}"] = 0
    points_histogram[f">={point_bins[-1]}"] = 0
    point_values: list[float] = []
    points_unknown = 0
    objects_per_frame: dict[int, int] = {}
    yaw_rose = [0] * YAW_BINS
    distance_buckets: dict[str, int] = {}
    tracks: dict[tuple[str, int | str], list[np.ndarray]] = {}

    n_boxes = 0
    for frame in seq.frames:
        objects_per_frame[len(frame.boxes)] = (
            objects_per_frame.get(len(frame.boxes), 0) + 1
        )
        for box in frame.boxes:
            n_boxes += 1
            class_counts[box.category] = class_counts.get(box.category, 0) + 1

            points = box.attributes.get("num_lidar_points")
            if points is None:
                points_unknown += 1
            else:
                points = int(points)
                points_histogram[_point_bin_label(points, point_bins)] += 1
                if points > 0:
                    point_values.append(points)

            bin_idx = int((box.yaw + math.pi) / (2 * math.pi) * YAW_BINS) % YAW_BINS
            yaw_rose[bin_idx] += 1

            distance = float(np.hypot(box.center[0], box.center[1]))
            lo = int(distance // DISTANCE_BIN_WIDTH) * int(DISTANCE_BIN_WIDTH)
            distance_buckets[f"{lo}-{lo + int(DISTANCE_BIN_WIDTH)}"] = (
                distance_buckets.get(f"{lo}-{lo + int(DISTANCE_BIN_WIDTH)}", 0) + 1
            )

            if box.track_id is not None:
                tracks.setdefault((box.category, box.track_id), []).append(
                    box.center
                )

    lengths: dict[str, list[float]] = {}
    for (category, _), centers in tracks.items():
        length = float(
            sum(
                np.linalg.norm(b - a)
                for a, b in zip(centers, centers[1:])
            )
        )
        lengths.setdefault(category, []).append(length)

    return StatsReport(
        n_frames=len(seq.frames),
        n_boxes=n_boxes,
        n_tracks=len(tracks),
        class_counts=class_counts,
        points_histogram=points_histogram,
        points_mean=float(np.mean(point_values)) if point_values else 0.0,
        points_unknown=points_unknown,
        objects_per_frame=objects_per_frame,
        objects_per_frame_mean=(
            n_boxes / len(seq.frames) if seq.frames else 0.0
        ),
        track_length_avg={
            c: float(np.mean(v)) for c, v in sorted(lengths.items())
        },
        track_length_max={
            c: float(np.max(v)) for c, v in sorted(lengths.items())
        },
        yaw_rose=yaw_rose,
        distance_buckets=distance_buckets,
    )
