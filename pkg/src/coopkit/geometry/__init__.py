"""Core 3D types: rotations, poses, point clouds, boxes, cameras."""

from coopkit.geometry.boxes import (
    CATEGORIES,
    Box3D,
    bev_center_distance,
    box_corners,
    box_from_corners,
    fit_oriented_box,
    iou_3d,
    points_in_box,
)
from coopkit.geometry.camera import CameraCalibration, estimate_extrinsics, project_points
from coopkit.geometry.cloud import (
    PROVENANCE_INFRA,
    PROVENANCE_VEHICLE,
    PointCloud,
    transform_points,
)
from coopkit.geometry.pose import Pose, interpolate_pose
from coopkit.geometry.quaternion import Quaternion, slerp

__all__ = [
    "CATEGORIES",
    "Box3D",
    "CameraCalibration",
    "PROVENANCE_INFRA",
    "PROVENANCE_VEHICLE",
    "PointCloud",
    "Pose",
    "Quaternion",
    "bev_center_distance",
    "box_corners",
    "box_from_corners",
    "estimate_extrinsics",
    "fit_oriented_box",
    "interpolate_pose",
    "iou_3d",
    "points_in_box",
    "project_points",
    "slerp",
    "transform_points",
]
