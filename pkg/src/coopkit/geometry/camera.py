"""Pinhole camera with polynomial distortion, projection and pose fitting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from coopkit.errors import EstimationError
from coopkit.geometry.pose import Pose
from coopkit.geometry.quaternion import Quaternion

logger = logging.getLogger(__name__)


@dataclass
class CameraCalibration:
    """Intrinsics plus radial (k1..k3) and tangential (p1, p2) distortion.

    ``image_size`` is (width, height) in pixels. ``extrinsics``, when set,
    maps some sensor frame into this camera's frame.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    image_size: tuple[int, int]
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    extrinsics: Pose | None = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        w, h = self.image_size
        if not (0 <= self.cx < w and 0 <= self.cy < h):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {w}x{h} image")


def _distort(xn: np.ndarray, yn: np.ndarray, calib: CameraCalibration) -> tuple[np.ndarray, np.ndarray]:
    r2 = xn * xn + yn * yn
    radial = 1.0 + r2 * (calib.k1 + r2 * (calib.k2 + r2 * calib.k3))
    xd = xn * radial + 2.0 * calib.p1 * xn * yn + calib.p2 * (r2 + 2.0 * xn * xn)
    yd = yn * radial + calib.p1 * (r2 + 2.0 * yn * yn) + 2.0 * calib.p2 * xn * yn
    return xd, yd


def project_points(points: np.ndarray, calib: CameraCalibration) -> tuple[np.ndarray, np.ndarray]:
    """Project camera-frame points to pixels.

    Returns (pixels (N, 2), in_front (N,) bool). Points at or behind the
    image plane get NaN pixels and in_front False; callers drawing overlays
    must skip them.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    in_front = p[:, 2] > 0.0
    z = np.where(in_front, p[:, 2], np.nan)
    xn, yn = p[:, 0] / z, p[:, 1] / z
    xd, yd = _distort(xn, yn, calib)
    pixels = np.stack([calib.fx * xd + calib.cx, calib.fy * yd + calib.cy], axis=1)
    return pixels, in_front


def _undistort_normalized(xd: np.ndarray, yd: np.ndarray, calib: CameraCalibration) -> tuple[np.ndarray, np.ndarray]:
    """Invert the distortion model by fixed-point iteration."""
    xn, yn = xd.copy(), yd.copy()
    for _ in range(20):
        dx, dy = _distort(xn, yn, calib)
        xn = xn + (xd - dx)
        yn = yn + (yd - dy)
    return xn, yn


def _dlt_pose(obj: np.ndarray, img_norm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct linear transform for [R|t] from normalized image coords."""
    n = len(obj)
    a = np.zeros((2 * n, 12))
    for i in range(n):
        x, y, z = obj[i]
        u, v = img_norm[i]
        a[2 * i, 0:4] = [x, y, z, 1.0]
        a[2 * i, 8:12] = [-u * x, -u * y, -u * z, -u]
        a[2 * i + 1, 4:8] = [x, y, z, 1.0]
        a[2 * i + 1, 8:12] = [-v * x, -v * y, -v * z, -v]
    _, sv, vt = np.linalg.svd(a)
    # A rank collapse beyond the expected null space means the points do not
    # constrain the pose (coplanar or collinear input).
    if sv[-2] < 1e-10 * sv[0]:
        raise EstimationError("degenerate correspondence geometry")
    p = vt[-1].reshape(3, 4)
    # Resolve the overall sign first: depths p3 . (X, 1) must be positive.
    if np.median(obj @ p[2, :3] + p[2, 3]) < 0:
        p = -p
    m = p[:, :3]
    u_svd, s_svd, vt_svd = np.linalg.svd(m)
    scale = s_svd.mean()
    if scale < 1e-12:
        raise EstimationError("degenerate correspondence geometry")
    r = u_svd @ vt_svd
    if np.linalg.det(r) < 0:
        r = u_svd @ np.diag([1.0, 1.0, -1.0]) @ vt_svd
    t = p[:, 3] / scale
    return r, t


def _rodrigues(rvec: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(rvec))
    if angle < 1e-12:
        return np.eye(3)
    axis = rvec / angle
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _rotvec_from_matrix(r: np.ndarray) -> np.ndarray:
    q = Quaternion.from_matrix(r)
    axis, angle = q.to_axis_angle()
    return axis * angle


def estimate_extrinsics(
    object_points: np.ndarray,
    image_points: np.ndarray,
    calib: CameraCalibration,
    source_frame: str = "sensor",
    max_iterations: int = 100,
    step_tol: float = 1e-10,
) -> tuple[Pose, float]:
    """Recover the sensor-to-camera pose from 2D-3D correspondences.

    A linear DLT estimate is refined by damped Gauss-Newton on the pixel
    reprojection error, using the full distortion model. Returns the pose
    and the per-coordinate reprojection RMSE in pixels. Raises
    EstimationError for fewer than 6 pairs or degenerate geometry.
    """
    obj = np.asarray(object_points, dtype=float).reshape(-1, 3)
    img = np.asarray(image_points, dtype=float).reshape(-1, 2)
    if len(obj) != len(img):
        raise EstimationError(f"{len(obj)} object points vs {len(img)} image points")
    if len(obj) < 6:
        raise EstimationError(f"need at least 6 correspondences, got {len(obj)}")

    xd = (img[:, 0] - calib.cx) / calib.fx
    yd = (img[:, 1] - calib.cy) / calib.fy
    xn, yn = _undistort_normalized(xd, yd, calib)
    r, t = _dlt_pose(obj, np.stack([xn, yn], axis=1))

    def residuals(params: np.ndarray) -> np.ndarray:
        rot = _rodrigues(params[:3])
        cam = obj @ rot.T + params[3:]
        z = np.where(cam[:, 2] > 1e-9, cam[:, 2], 1e-9)
        dx, dy = _distort(cam[:, 0] / z, cam[:, 1] / z, calib)
        return np.concatenate(
            [calib.fx * dx + calib.cx - img[:, 0], calib.fy * dy + calib.cy - img[:, 1]]
        )

    params = np.concatenate([_rotvec_from_matrix(r), t])
    res = residuals(params)
    cost = float(res @ res)
    lam = 1e-3
    for _ in range(max_iterations):
        # Central-difference Jacobian; 6 parameters keep this cheap.
        jac = np.zeros((len(res), 6))
        for j in range(6):
            eps = 1e-6 * max(1.0, abs(params[j]))
            hi, lo = params.copy(), params.copy()
            hi[j] += eps
            lo[j] -= eps
            jac[:, j] = (residuals(hi) - residuals(lo)) / (2.0 * eps)
        jtj = jac.T @ jac
        jtr = jac.T @ res
        step = None
        for _ in range(10):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)) + 1e-12 * np.eye(6), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + step
            trial_res = residuals(trial)
            trial_cost = float(trial_res @ trial_res)
            if trial_cost <= cost:
                params, res, cost = trial, trial_res, trial_cost
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if step is None or float(np.linalg.norm(step)) < step_tol:
            break

    rmse = math.sqrt(cost / res.size)
    rot = Quaternion.from_matrix(_rodrigues(params[:3]))
    pose = Pose(rot, params[3:].copy(), source_frame, "camera")
    logger.debug("extrinsics fit over %d pairs, rmse %.4f px", len(obj), rmse)
    return pose, rmse
