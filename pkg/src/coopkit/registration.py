"""Vehicle-to-infrastructure point cloud alignment."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from coopkit.errors import EstimationError, FrameMismatchError, RegistrationError
from coopkit.geometry import (
    PROVENANCE_INFRA,
    PROVENANCE_VEHICLE,
    PointCloud,
    Pose,
    Quaternion,
    interpolate_pose,
    transform_points,
)

logger = logging.getLogger(__name__)


@dataclass
class IcpParams:
    max_iterations: int = 50
    eps: float = 1e-6
    correspondence_max_dist: float = 2.0
    subsample: int | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.correspondence_max_dist <= 0:
            raise ValueError("correspondence_max_dist must be positive")


@dataclass
class RegistrationResult:
    pose: Pose
    rmse: float
    n_iterations: int
    converged: bool
    n_correspondences: int


def rigid_from_correspondences(
    source_pts: np.ndarray,
    target_pts: np.ndarray,
    source_frame: str = "vehicle",
    target_frame: str = "infrastructure",
) -> tuple[Pose, float]:
    """Least-squares rigid transform from paired points, plus residual RMSE.

    Closed form via SVD of the cross covariance, with the determinant
    corrected so the result is a proper rotation. Raises EstimationError
    for fewer than 3 pairs or degenerate (collinear) geometry.
    """
    src = np.asarray(source_pts, dtype=float).reshape(-1, 3)
    dst = np.asarray(target_pts, dtype=float).reshape(-1, 3)
    if len(src) != len(dst):
        raise EstimationError(f"{len(src)} source points vs {len(dst)} target points")
    if len(src) < 3:
        raise EstimationError(f"need at least 3 pairs, got {len(src)}")
    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    h = (src - src_mean).T @ (dst - dst_mean)
    u, s, vt = np.linalg.svd(h)
    if s[0] < 1e-12 or s[1] < 1e-9 * s[0]:
        raise EstimationError("points are collinear; rotation is unconstrained")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = dst_mean - r @ src_mean
    residual = src @ r.T + t - dst
    rmse = float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))
    pose = Pose(Quaternion.from_matrix(r), t, source_frame, target_frame)
    return pose, rmse


def coarse_from_gnss_imu(
    source_utm: np.ndarray,
    target_utm: np.ndarray,
    imu_rotation: Quaternion,
    source_frame: str = "vehicle",
    target_frame: str = "infrastructure",
    source_zone: str | None = None,
    target_zone: str | None = None,
) -> Pose:
    """Initial alignment from satellite positioning and inertial heading.

    The result uses ``imu_rotation`` as is and ``target_utm - source_utm``
    as translation; both positions must come from the same UTM zone.
    """
    if source_zone != target_zone:
        raise RegistrationError(
            f"UTM zones differ ({source_zone!r} vs {target_zone!r}); positions are not comparable"
        )
    src = np.asarray(source_utm, dtype=float).reshape(3)
    dst = np.asarray(target_utm, dtype=float).reshape(3)
    return Pose(imu_rotation, dst - src, source_frame, target_frame)


def icp_point_to_point(
    source: PointCloud,
    target: PointCloud,
    init: Pose,
    params: IcpParams | None = None,
) -> RegistrationResult:
    """Iterative closest point with nearest-neighbor matching and a distance gate.

    Each iteration solves the closed-form rigid update for the current
    matches; the solved update can only lower the residual on those matches,
    which is asserted. Iteration stops when the improvement drops below
    ``eps`` or the match residual would rise, so the reported RMSE sequence
    never increases.
    """
    params = params or IcpParams()
    if source.frame != init.source_frame or target.frame != init.target_frame:
        raise FrameMismatchError(
            f"init maps {init.source_frame}->{init.target_frame}, clouds are "
            f"{source.frame}->{target.frame}"
        )
    if len(source) == 0 or len(target) == 0:
        raise RegistrationError("cannot align empty clouds")
    src = source.points
    if params.subsample is not None and params.subsample < len(src):
        # Evenly spaced picks keep runs reproducible without an RNG.
        src = src[np.linspace(0, len(src), params.subsample, endpoint=False).astype(int)]
    tree = cKDTree(target.points)

    pose = init
    prev_rmse: float | None = None
    n_matched = 0
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        moved = pose.apply(src)
        dist, idx = tree.query(moved, distance_upper_bound=params.correspondence_max_dist)
        mask = np.isfinite(dist)
        n_matched = int(mask.sum())
        if n_matched < 3:
            if prev_rmse is None:
                raise RegistrationError(
                    f"only {n_matched} correspondences within "
                    f"{params.correspondence_max_dist} m; initial pose too far off"
                )
            break
        matched_src = moved[mask]
        matched_dst = target.points[idx[mask]]
        pre_rmse = float(np.sqrt(np.mean(dist[mask] ** 2)))
        try:
            delta, post_rmse = rigid_from_correspondences(
                matched_src, matched_dst, pose.target_frame, pose.target_frame
            )
        except EstimationError as e:
            raise RegistrationError(f"degenerate correspondence set: {e}") from None
        # The closed-form step is optimal for this match set, so it cannot
        # make the residual on it worse.
        assert post_rmse <= pre_rmse + 1e-9, "rigid update raised the residual"
        if prev_rmse is not None and post_rmse > prev_rmse:
            # Re-matching stopped helping; keep the previous pose.
            converged = True
            break
        candidate = Pose(
            delta.rotation.multiply(pose.rotation),
            delta.rotation.rotate(pose.translation) + delta.translation,
            pose.source_frame,
            pose.target_frame,
        )
        improvement = float("inf") if prev_rmse is None else prev_rmse - post_rmse
        pose = candidate
        prev_rmse = post_rmse
        if improvement < params.eps:
            converged = True
            break

    return RegistrationResult(
        pose=pose,
        rmse=float(prev_rmse) if prev_rmse is not None else float("inf"),
        n_iterations=iterations,
        converged=converged,
        n_correspondences=n_matched,
    )


def register_sequence(
    vehicle_clouds: list[PointCloud],
    infra_clouds: list[PointCloud],
    inits: Pose | list[Pose],
    anchor_stride: int = 10,
    params: IcpParams | None = None,
) -> list[Pose]:
    """Align every frame, running ICP only on anchor frames.

    Anchors are every ``anchor_stride``-th frame plus the last one; poses in
    between are interpolated using vehicle timestamps (frame index when
    timestamps are missing). With stride 1 every frame is an anchor, and a
    larger stride leaves anchor results unchanged because each anchor uses
    its own entry of ``inits``.
    """
    if len(vehicle_clouds) != len(infra_clouds):
        raise RegistrationError(
            f"{len(vehicle_clouds)} vehicle frames vs {len(infra_clouds)} infrastructure frames"
        )
    n = len(vehicle_clouds)
    if n == 0:
        return []
    if anchor_stride < 1:
        raise ValueError("anchor_stride must be at least 1")
    init_list = list(inits) if isinstance(inits, (list, tuple)) else [inits] * n
    if len(init_list) != n:
        raise RegistrationError(f"{len(init_list)} init poses for {n} frames")

    anchors = sorted(set(range(0, n, anchor_stride)) | {n - 1})
    anchor_pose: dict[int, Pose] = {}
    for a in anchors:
        try:
            result = icp_point_to_point(vehicle_clouds[a], infra_clouds[a], init_list[a], params)
        except (RegistrationError, FrameMismatchError) as e:
            raise RegistrationError(f"anchor frame {a}: {e}") from None
        anchor_pose[a] = result.pose
        logger.debug("anchor %d: rmse %.4f after %d iterations", a, result.rmse, result.n_iterations)

    def frame_time(i: int) -> float:
        ts = vehicle_clouds[i].timestamp
        return float(ts) if ts is not None else float(i)

    poses: list[Pose | None] = [None] * n
    for a in anchors:
        poses[a] = anchor_pose[a]
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        span = frame_time(hi) - frame_time(lo)
        for i in range(lo + 1, hi):
            t = (frame_time(i) - frame_time(lo)) / span if span > 0 else 0.0
            poses[i] = interpolate_pose(anchor_pose[lo], anchor_pose[hi], min(1.0, max(0.0, t)))
    return poses  # type: ignore[return-value]


def merge_clouds(infra: PointCloud, vehicle: PointCloud, vehicle_to_infra: Pose) -> PointCloud:
    """Fuse both views in the infrastructure frame, tagging point origins."""
    if vehicle_to_infra.source_frame != vehicle.frame or vehicle_to_infra.target_frame != infra.frame:
        raise FrameMismatchError(
            f"transform maps {vehicle_to_infra.source_frame}->{vehicle_to_infra.target_frame}, "
            f"clouds are {vehicle.frame} and {infra.frame}"
        )
    moved = transform_points(vehicle, vehicle_to_infra)
    points = np.vstack([infra.points, moved.points])
    if infra.intensity is not None and moved.intensity is not None:
        intensity = np.concatenate([infra.intensity, moved.intensity])
    else:
        if (infra.intensity is None) != (moved.intensity is None):
            logger.debug("intensity present on only one cloud; dropping it from the merge")
        intensity = None
    provenance = np.concatenate(
        [
            np.full(len(infra), PROVENANCE_INFRA, dtype=np.uint8),
            np.full(len(moved), PROVENANCE_VEHICLE, dtype=np.uint8),
        ]
    )
    return PointCloud(
        points,
        infra.frame,
        timestamp=infra.timestamp,
        intensity=intensity,
        provenance=provenance,
    )
