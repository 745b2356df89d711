"""Point clouds tagged with a coordinate frame and capture time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coopkit.errors import FrameMismatchError
from coopkit.geometry.pose import Pose

# Per-point provenance codes used by merged clouds.
PROVENANCE_INFRA = 0
PROVENANCE_VEHICLE = 1


@dataclass
class PointCloud:
    """N points as float64 (N, 3), with optional per-point extras.

    ``timestamp`` is integer microseconds since the epoch, or None when the
    cloud is not tied to a capture. ``provenance`` (uint8 codes, see
    PROVENANCE_*) is set on merged clouds to record which sensor each point
    came from.
    """

    points: np.ndarray
    frame: str
    timestamp: int | None = None
    intensity: np.ndarray | None = None
    provenance: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        n = len(self.points)
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if len(self.intensity) != n:
                raise ValueError(f"{len(self.intensity)} intensities for {n} points")
        if self.provenance is not None:
            self.provenance = np.asarray(self.provenance, dtype=np.uint8).reshape(-1)
            if len(self.provenance) != n:
                raise ValueError(f"{len(self.provenance)} provenance codes for {n} points")

    def __len__(self) -> int:
        return len(self.points)


def transform_points(cloud: PointCloud, pose: Pose) -> PointCloud:
    """Re-express a cloud in the pose's target frame; extras carry over."""
    if cloud.frame != pose.source_frame:
        raise FrameMismatchError(f"cloud in frame {cloud.frame!r}, pose maps from {pose.source_frame!r}")
    return PointCloud(
        pose.apply(cloud.points),
        pose.target_frame,
        timestamp=cloud.timestamp,
        intensity=None if cloud.intensity is None else cloud.intensity.copy(),
        provenance=None if cloud.provenance is None else cloud.provenance.copy(),
    )
