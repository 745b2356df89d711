"""Oriented 3D bounding boxes: corners, overlap, distance, fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from coopkit.errors import EstimationError

CATEGORIES = (
    "car",
    "truck",
    "trailer",
    "van",
    "motorcycle",
    "bus",
    "pedestrian",
    "bicycle",
    "other",
)


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi). In-range values come back bit-identical."""
    if -math.pi <= a < math.pi:
        return a
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass
class Box3D:
    """Box centered at ``center`` with dimensions (length, width, height).

    ``yaw`` rotates the length axis about +z, stored wrapped to [-pi, pi).
    ``score`` is only set on detections; ``track_id`` only on tracked or
    labeled boxes.
    """

    center: np.ndarray
    dimensions: np.ndarray
    yaw: float
    category: str = "other"
    track_id: int | str | None = None
    score: float | None = None
    attributes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.dimensions = np.asarray(self.dimensions, dtype=np.float64).reshape(3)
        if not np.all(self.dimensions > 0):
            raise ValueError(f"dimensions must be positive, got {self.dimensions}")
        self.yaw = wrap_angle(float(self.yaw))
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def volume(self) -> float:
        return float(np.prod(self.dimensions))


def box_corners(box: Box3D) -> np.ndarray:
    """Return the 8 corners, shape (8, 3).

    Order: bottom face first, starting at (+l/2, +w/2, -h/2) in the box
    frame and visiting (+,+), (+,-), (-,-), (-,+), then the top face in
    the same x-y order. Edges of the wireframe are (i, i+1 mod 4) on each
    face plus the four verticals (i, i+4).
    """
    l, w, h = box.dimensions
    xs = np.array([l, l, -l, -l, l, l, -l, -l]) / 2.0
    ys = np.array([w, -w, -w, w, w, -w, -w, w]) / 2.0
    zs = np.array([-h, -h, -h, -h, h, h, h, h]) / 2.0
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    return np.stack(
        [
            box.center[0] + c * xs - s * ys,
            box.center[1] + s * xs + c * ys,
            box.center[2] + zs,
        ],
        axis=1,
    )


def box_from_corners(corners: np.ndarray, category: str = "other") -> Box3D:
    """Rebuild a box from corners in box_corners() order."""
    c = np.asarray(corners, dtype=float)
    if c.shape != (8, 3):
        raise ValueError(f"expected (8, 3) corners, got {c.shape}")
    center = c.mean(axis=0)
    ex = c[0] - c[3]  # length axis
    ey = c[0] - c[1]  # width axis
    l = float(np.linalg.norm(ex[:2]))
    yaw = math.atan2(ex[1], ex[0])
    w = float(np.linalg.norm(ey[:2]))
    h = float(c[4, 2] - c[0, 2])
    return Box3D(center, np.array([l, w, h]), yaw, category=category)


def bev_center_distance(a: Box3D, b: Box3D) -> float:
    """Euclidean distance between centers projected to the ground plane."""
    d = a.center[:2] - b.center[:2]
    return float(math.hypot(d[0], d[1]))


def _bev_polygon(box: Box3D) -> np.ndarray:
    """Footprint as a (4, 2) counterclockwise polygon."""
    return box_corners(box)[:4, :2][::-1]


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by convex ccw ``clip``."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        a, b = clip[i], clip[(i + 1) % n]
        edge = (b[0] - a[0], b[1] - a[1])
        if not output:
            break
        points = output
        output = []
        prev = points[-1]
        # Inside a ccw polygon means on or left of every directed edge.
        prev_in = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0]) >= 0
        for cur in points:
            cur_in = edge[0] * (cur[1] - a[1]) - edge[1] * (cur[0] - a[0]) >= 0
            if cur_in != prev_in:
                # Edge crossing: intersect segment prev->cur with the clip line.
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = edge[0] * dy - edge[1] * dx
                if abs(denom) > 1e-15:
                    t = (edge[0] * (a[1] - prev[1]) - edge[1] * (a[0] - prev[0])) / denom
                    output.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output) if output else np.empty((0, 2))


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volumetric IoU of two yaw-oriented boxes.

    Decomposes into footprint overlap (convex polygon clipping, which is
    exact for yaw-only rotations) times vertical interval overlap.
    """
    inter_bev = _polygon_area(_clip_polygon(_bev_polygon(a), _bev_polygon(b)))
    if inter_bev <= 0.0:
        return 0.0
    za0, za1 = a.center[2] - a.dimensions[2] / 2, a.center[2] + a.dimensions[2] / 2
    zb0, zb1 = b.center[2] - b.dimensions[2] / 2, b.center[2] + b.dimensions[2] / 2
    inter_z = min(za1, zb1) - max(za0, zb0)
    if inter_z <= 0.0:
        return 0.0
    inter = inter_bev * inter_z
    union = a.volume + b.volume - inter
    return float(inter / union)


def fit_oriented_box(points: np.ndarray, category: str = "other") -> Box3D:
    """Fit a yaw-oriented box to points via principal axes of the footprint.

    The box yaw follows the dominant horizontal spread, length is the extent
    along it, and the vertical extent is taken straight from z. Needs at
    least 5 points to be meaningful.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(p) < 5:
        raise EstimationError(f"need at least 5 points to fit a box, got {len(p)}")
    xy = p[:, :2]
    centered = xy - xy.mean(axis=0)
    cov = centered.T @ centered / len(p)
    eigvals, eigvecs = np.linalg.eigh(cov)
    major = eigvecs[:, int(np.argmax(eigvals))]
    yaw = math.atan2(major[1], major[0])
    c, s = math.cos(-yaw), math.sin(-yaw)
    local = np.stack([c * xy[:, 0] - s * xy[:, 1], s * xy[:, 0] + c * xy[:, 1]], axis=1)
    lo, hi = local.min(axis=0), local.max(axis=0)
    z_lo, z_hi = p[:, 2].min(), p[:, 2].max()
    mid_local = (lo + hi) / 2.0
    c2, s2 = math.cos(yaw), math.sin(yaw)
    center = np.array(
        [
            c2 * mid_local[0] - s2 * mid_local[1],
            s2 * mid_local[0] + c2 * mid_local[1],
            (z_lo + z_hi) / 2.0,
        ]
    )
    dims = np.array([hi[0] - lo[0], hi[1] - lo[1], z_hi - z_lo])
    dims = np.maximum(dims, 1e-6)
    return Box3D(center, dims, yaw, category=category)


def points_in_box(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of points inside the box (boundary inclusive)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3) - box.center
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    local_x = c * p[:, 0] - s * p[:, 1]
    local_y = s * p[:, 0] + c * p[:, 1]
    half = box.dimensions / 2.0
    return (
        (np.abs(local_x) <= half[0])
        & (np.abs(local_y) <= half[1])
        & (np.abs(p[:, 2]) <= half[2])
    )
