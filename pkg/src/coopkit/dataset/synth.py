"""Synthetic crossing-roads scenes observed by a vehicle and a roadside sensor.

The generator builds a small intersection: two perpendicular roads,
moving traffic, an ego vehicle carrying a sensor, and a fixed elevated
sensor that also defines the world coordinate frame. Object surfaces
are sampled into candidate points once per (seed, frame, object) in
world coordinates; each sensor then keeps the candidates it can
actually see (facing, range, field of view, not behind an occluder)
and perturbs them with its own measurement noise. Because candidates
never depend on sensors or occluders, removing an occluder can only
grow a cloud, and runs with the same config are bit-identical.

Occluders block rays but return no points themselves, which keeps
recall comparisons between sensor views free of occluder artifacts.
Ground return sampling is available but off by default, so a scene
with no objects produces genuinely empty clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bevfusion import SIZE_TEMPLATES
from ..geometry import Box3D, PointCloud, Pose, Quaternion
from ..geometry.boxes import CATEGORIES, wrap_angle
from ..openlabel.model import Frame, Sequence

__all__ = [
    "GROUND_Z",
    "GnssImuSample",
    "Occluder",
    "SynthScene",
    "SynthSceneConfig",
    "synth_scene",
]

# The elevated sensor sits at the frame origin; the road surface lies
# well below it, inside the default BEV height window.
GROUND_Z = -7.95

_TAG_SCENE, _TAG_GROUND, _TAG_OBJECT, _TAG_NOISE, _TAG_GNSS = range(5)
_SENSOR_VEHICLE, _SENSOR_INFRA = 0, 1
_UTM_BASE = np.array([695000.0, 5340000.0, 500.0])

# Speed ranges in m/s as (mean, half spread).
_SPEEDS = {
    "car": (7.0, 2.0),
    "van": (7.0, 2.0),
    "truck": (5.0, 1.0),
    "bus": (5.0, 1.0),
    "trailer": (0.0, 0.0),
    "motorcycle": (7.0, 2.0),
    "bicycle": (3.0, 1.0),
    "pedestrian": (1.2, 0.4),
    "other": (2.0, 1.0),
}


def _default_mix() -> dict[str, float]:
    return {
        "car": 0.45,
        "truck": 0.10,
        "van": 0.10,
        "bus": 0.05,
        "pedestrian": 0.15,
        "bicycle": 0.10,
        "motorcycle": 0.05,
    }


@dataclass(frozen=True)
class Occluder:
    """Opaque box that blocks rays without producing returns."""

    center: tuple[float, float, float]
    dimensions: tuple[float, float, float]
    yaw: float = 0.0


@dataclass(frozen=True)
class SynthSceneConfig:
    seed: int = 0
    n_frames: int = 5
    n_objects: int = 10
    class_mix: dict[str, float] = field(default_factory=_default_mix)
    frame_dt_us: int = 100_000
    road_half_width: float = 4.0
    road_extent: float = 60.0
    min_separation: float = 3.0
    vehicle_start: tuple[float, float] = (-35.0, -2.0)
    vehicle_yaw: float = 0.0
    vehicle_speed: float = 5.0
    vehicle_sensor_height: float = 1.8
    vehicle_fov_deg: float = 360.0
    max_range: float = 120.0
    points_per_m2: float = 12.0
    ground_points_per_m2: float = 0.0
    noise_sigma: float = 0.01
    occluders: tuple[Occluder, ...] = ()
    force_occlusion: bool = False
    weak_objects: int = 0
    weak_points_per_m2: float = 0.4
    gnss_sigma: float = 0.5
    imu_sigma_deg: float = 2.0

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")
        if self.n_objects < 0:
            raise ValueError(f"n_objects must be >= 0, got {self.n_objects}")
        if not self.class_mix or any(w < 0 for w in self.class_mix.values()):
            raise ValueError("class_mix needs non-negative weights")
        if sum(self.class_mix.values()) <= 0:
            raise ValueError("class_mix weights must not all be zero")
        unknown = set(self.class_mix) - set(CATEGORIES)
        if unknown:
            raise ValueError(f"unknown categories in class_mix: {sorted(unknown)}")
        for name in ("frame_dt_us", "road_half_width", "road_extent", "max_range"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in (
            "min_separation",
            "vehicle_speed",
            "points_per_m2",
            "ground_points_per_m2",
            "noise_sigma",
            "weak_points_per_m2",
            "gnss_sigma",
            "imu_sigma_deg",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.vehicle_fov_deg <= 360:
            raise ValueError("vehicle_fov_deg must lie in (0, 360]")
        if not 0 <= self.weak_objects <= self.n_objects:
            raise ValueError("weak_objects must lie in [0, n_objects]")


@dataclass
class _MovingObject:
    category: str
    dims: np.ndarray
    pos0: np.ndarray
    vel: np.ndarray
    yaw: float

    def center(self, t: float) -> np.ndarray:
        xy = self.pos0 + self.vel * t
        return np.array([xy[0], xy[1], GROUND_Z + self.dims[2] / 2.0])

    def box(self, t: float, track_id: int) -> Box3D:
        return Box3D(
            center=self.center(t),
            dimensions=self.dims.copy(),
            yaw=self.yaw,
            category=self.category,
            track_id=track_id,
        )


@dataclass
class GnssImuSample:
    """One frame of coarse positioning: satellite fixes plus heading."""

    vehicle_utm: np.ndarray
    infra_utm: np.ndarray
    imu_rotation: Quaternion
    utm_zone: str = "32U"


@dataclass
class SynthScene:
    """Everything a downstream pipeline needs, plus the hidden truth.

    Clouds are per frame: vehicle clouds in the moving vehicle frame,
    infrastructure clouds in the fixed world frame the labels use.
    true_poses holds the exact per-frame vehicle-to-infrastructure
    transform; gnss carries the noisy version a real system would have.
    """

    vehicle_clouds: list[PointCloud]
    infra_clouds: list[PointCloud]
    labels: Sequence
    true_poses: list[Pose]
    gnss: list[GnssImuSample]


def _min_distance_over_time(
    p0: np.ndarray, v0: np.ndarray, p1: np.ndarray, v1: np.ndarray, horizon: float
) -> float:
    rel = p0 - p1
    rel_v = v0 - v1
    speed_sq = float(rel_v @ rel_v)
    candidates = [0.0, horizon]
    if speed_sq > 1e-12:
        candidates.append(min(max(-float(rel @ rel_v) / speed_sq, 0.0), horizon))
    return min(float(np.linalg.norm(rel + rel_v * t)) for t in candidates)


def _place_objects(config: SynthSceneConfig, rng: np.random.Generator) -> list[_MovingObject]:
    horizon = (config.n_frames - 1) * config.frame_dt_us / 1e6
    mix_names = sorted(config.class_mix)
    weights = np.array([config.class_mix[c] for c in mix_names], dtype=float)
    weights /= weights.sum()

    placed: list[_MovingObject] = []
    for _ in range(config.n_objects):
        category = str(rng.choice(mix_names, p=weights))
        base = np.array(SIZE_TEMPLATES.get(category, (2.0, 1.2, 1.5)))
        dims = base * rng.uniform(0.92, 1.08, size=3)
        mean, spread = _SPEEDS[category]
        speed = max(float(rng.uniform(mean - spread, mean + spread)), 0.0)

        for _ in range(300):
            axis = int(rng.integers(0, 2))
            direction = int(rng.choice([-1, 1]))
            if category == "pedestrian":
                side = int(rng.choice([-1, 1]))
                lateral = side * (
                    config.road_half_width + 1.0 + float(rng.uniform(0.0, 1.5))
                )
            else:
                # Right-hand traffic: the travel direction fixes the lane.
                lateral = -direction * config.road_half_width / 2.0 + float(
                    rng.uniform(-0.5, 0.5)
                )
            s = float(rng.uniform(-config.road_extent, config.road_extent))
            if axis == 0:
                pos0 = np.array([s, lateral])
                vel = np.array([direction * speed, 0.0])
            else:
                pos0 = np.array([lateral, s])
                vel = np.array([0.0, direction * speed])
            radius = float(np.hypot(dims[0], dims[1])) / 2.0
            ok = True
            for other in placed:
                other_radius = float(np.hypot(other.dims[0], other.dims[1])) / 2.0
                needed = config.min_separation + radius + other_radius
                if (
                    _min_distance_over_time(pos0, vel, other.pos0, other.vel, horizon)
                    < needed
                ):
                    ok = False
                    break
            if ok:
                yaw = math.atan2(vel[1], vel[0]) if speed > 0 else (
                    0.0 if axis == 0 else math.pi / 2
                ) * direction
                placed.append(_MovingObject(category, dims, pos0, vel, wrap_angle(yaw)))
                break
        else:
            raise ValueError(
                "could not place all objects with the required separation; "
                "reduce n_objects or min_separation"
            )
    return placed


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))


def _sample_box_surface(
    obj: _MovingObject, center: np.ndarray, density: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate points and outward normals on the four sides and top."""
    l, w, h = obj.dims
    faces = [
        (np.array([1.0, 0.0, 0.0]), w * h),
        (np.array([-1.0, 0.0, 0.0]), w * h),
        (np.array([0.0, 1.0, 0.0]), l * h),
        (np.array([0.0, -1.0, 0.0]), l * h),
        (np.array([0.0, 0.0, 1.0]), l * w),
    ]
    half = np.array([l, w, h]) / 2.0
    points_local = []
    normals_local = []
    for normal, area in faces:
        n = int(round(density * area))
        if n == 0:
            continue
        p = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
        fixed = int(np.argmax(np.abs(normal)))
        p[:, fixed] = half[fixed] * normal[fixed]
        points_local.append(p)
        normals_local.append(np.tile(normal, (n, 1)))
    if not points_local:
        empty = np.zeros((0, 3))
        return empty, empty.copy()
    local = np.vstack(points_local)
    normals = np.vstack(normals_local)
    c, s = math.cos(obj.yaw), math.sin(obj.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + center, normals @ rot.T


def _sample_ground(config: SynthSceneConfig, rng: np.random.Generator) -> np.ndarray:
    density = config.ground_points_per_m2
    hw = config.road_half_width
    ext = config.road_extent
    if density <= 0:
        return np.zeros((0, 3))
    # Strip along x covers the whole road including the crossing square;
    # the y strip only adds its parts outside the square.
    n_a = int(round(density * (2 * ext) * (2 * hw)))
    a = np.column_stack(
        [
            rng.uniform(-ext, ext, n_a),
            rng.uniform(-hw, hw, n_a),
            np.full(n_a, GROUND_Z),
        ]
    )
    n_b = int(round(density * 2 * (ext - hw) * (2 * hw)))
    offset = rng.uniform(0.0, 2 * (ext - hw), n_b)
    y = np.where(offset < ext - hw, -ext + offset, hw + (offset - (ext - hw)))
    b = np.column_stack(
        [rng.uniform(-hw, hw, n_b), y, np.full(n_b, GROUND_Z)]
    )
    return np.vstack([a, b])


def _blocked(
    origin: np.ndarray, points: np.ndarray, occluders: list[Occluder]
) -> np.ndarray:
    """True where the sensor-to-point segment passes through an occluder."""
    mask = np.zeros(len(points), dtype=bool)
    for occ in occluders:
        c = np.asarray(occ.center, dtype=float)
        half = np.asarray(occ.dimensions, dtype=float) / 2.0
        cos_y, sin_y = math.cos(occ.yaw), math.sin(occ.yaw)
        rot = np.array(
            [[cos_y, -sin_y, 0.0], [sin_y, cos_y, 0.0], [0.0, 0.0, 1.0]]
        )
        o = (origin - c) @ rot
        d = (points - origin) @ rot
        t_lo = np.full(len(points), 1e-9)
        t_hi = np.full(len(points), 1.0 - 1e-9)
        feasible = np.ones(len(points), dtype=bool)
        for axis in range(3):
            da = d[:, axis]
            parallel = np.abs(da) < 1e-12
            inside = np.abs(o[axis]) <= half[axis]
            feasible &= ~parallel | inside
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-half[axis] - o[axis]) / da
                t2 = (half[axis] - o[axis]) / da
            near = np.minimum(t1, t2)
            far = np.maximum(t1, t2)
            t_lo = np.where(parallel, t_lo, np.maximum(t_lo, near))
            t_hi = np.where(parallel, t_hi, np.minimum(t_hi, far))
        mask |= feasible & (t_lo <= t_hi)
    return mask


def _visible(
    origin: np.ndarray,
    points: np.ndarray,
    normals: np.ndarray | None,
    occluders: list[Occluder],
    config: SynthSceneConfig,
    heading: float | None,
) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    to_sensor = origin - points
    keep = np.linalg.norm(to_sensor, axis=1) <= config.max_range
    if normals is not None:
        keep &= np.einsum("ij,ij->i", normals, to_sensor) > 0
    if heading is not None and config.vehicle_fov_deg < 360.0:
        azimuth = np.arctan2(points[:, 1] - origin[1], points[:, 0] - origin[0])
        half_fov = math.radians(config.vehicle_fov_deg) / 2.0
        delta = np.arctan2(np.sin(azimuth - heading), np.cos(azimuth - heading))
        keep &= np.abs(delta) <= half_fov
    keep &= ~_blocked(origin, points, occluders)
    return keep


def _auto_occluder(
    config: SynthSceneConfig, target: _MovingObject, sensor: np.ndarray
) -> Occluder:
    """Wall between the vehicle sensor and the target's initial position.

    Placed a quarter of the way along the line of sight and sized from
    the ray geometry: tall and wide enough at frame zero to intercept
    every vehicle-sensor ray to the target surface, but no taller than
    what the elevated sensor at the origin can still see over, whenever
    both constraints fit.
    """
    center0 = target.center(0.0)
    diag = float(np.hypot(target.dims[0], target.dims[1]))
    to_target = center0[:2] - sensor[:2]
    d_sp = float(np.linalg.norm(to_target))
    fraction = 0.25
    wall_bev = sensor[:2] + to_target * fraction
    # Worst-case ray fraction at the wall plane: the nearest surface
    # point stretches it beyond the center fraction.
    f_eff = fraction * d_sp / max(d_sp - diag / 2.0, 1.0)
    target_top = GROUND_Z + target.dims[2]
    top = sensor[2] + max(0.0, f_eff * (target_top - sensor[2])) + 0.3

    d_iw = float(np.linalg.norm(wall_bev))
    d_ip = max(float(np.linalg.norm(center0[:2])) - diag / 2.0, 0.5)
    if d_iw < d_ip:
        # Rays from the origin-mounted sensor descend toward the ground;
        # the lowest one at the wall sets the height the wall must stay
        # under to leave that sensor's view open.
        lowest_ray = (d_iw / d_ip) * GROUND_Z - 0.15
        if lowest_ray >= sensor[2] + 0.4:
            top = min(top, lowest_ray)

    span = f_eff * diag + 4.0
    height = top - GROUND_Z
    yaw = math.atan2(to_target[1], to_target[0]) + math.pi / 2.0
    return Occluder(
        center=(wall_bev[0], wall_bev[1], GROUND_Z + height / 2.0),
        dimensions=(span, 0.5, height),
        yaw=wrap_angle(yaw),
    )


def synth_scene(config: SynthSceneConfig | None = None) -> SynthScene:
    """Generate one scene; same config, same bytes."""
    config = config or SynthSceneConfig()
    dt = config.frame_dt_us / 1e6
    objects = _place_objects(config, _stream(config.seed, _TAG_SCENE))

    ego_dir = np.array([math.cos(config.vehicle_yaw), math.sin(config.vehicle_yaw)])
    occluders = list(config.occluders)
    if config.force_occlusion and objects:
        sensor0 = np.array(
            [
                config.vehicle_start[0],
                config.vehicle_start[1],
                GROUND_Z + config.vehicle_sensor_height,
            ]
        )
        occluders.append(_auto_occluder(config, objects[0], sensor0))

    n = config.n_objects
    densities = [
        config.weak_points_per_m2
        if i >= n - config.weak_objects
        else config.points_per_m2
        for i in range(n)
    ]

    vehicle_clouds: list[PointCloud] = []
    infra_clouds: list[PointCloud] = []
    frames: list[Frame] = []
    true_poses: list[Pose] = []
    gnss: list[GnssImuSample] = []
    t0_us = 1_700_000_000_000_000

    for fi in range(config.n_frames):
        t = fi * dt
        timestamp = t0_us + fi * config.frame_dt_us
        ego_xy = np.asarray(config.vehicle_start) + ego_dir * config.vehicle_speed * t
        sensor_vehicle = np.array(
            [ego_xy[0], ego_xy[1], GROUND_Z + config.vehicle_sensor_height]
        )
        sensor_infra = np.zeros(3)

        ground = _sample_ground(config, _stream(config.seed, _TAG_GROUND, fi))
        groups: list[tuple[np.ndarray, np.ndarray | None]] = [(ground, None)]
        for oi, obj in enumerate(objects):
            pts, normals = _sample_box_surface(
                obj, obj.center(t), densities[oi], _stream(config.seed, _TAG_OBJECT, fi, oi)
            )
            groups.append((pts, normals))

        per_sensor_points: list[np.ndarray] = []
        per_sensor_counts: list[list[int]] = []
        for sensor_id, origin, heading in (
            (_SENSOR_VEHICLE, sensor_vehicle, config.vehicle_yaw),
            (_SENSOR_INFRA, sensor_infra, None),
        ):
            kept_groups = []
            counts = []
            for gi, (pts, normals) in enumerate(groups):
                noise = _stream(config.seed, _TAG_NOISE, fi, gi, sensor_id).normal(
                    0.0, config.noise_sigma, size=pts.shape
                )
                keep = _visible(origin, pts, normals, occluders, config, heading)
                kept_groups.append((pts + noise)[keep])
                if gi > 0:
                    counts.append(int(keep.sum()))
            per_sensor_points.append(
                np.vstack(kept_groups) if kept_groups else np.zeros((0, 3))
            )
            per_sensor_counts.append(counts)

        rotation = Quaternion.from_yaw(config.vehicle_yaw)
        pose = Pose(rotation, sensor_vehicle, "vehicle", "infrastructure")
        true_poses.append(pose)

        inv = pose.invert()
        local = per_sensor_points[_SENSOR_VEHICLE]
        vehicle_clouds.append(
            PointCloud(inv.apply(local), "vehicle", timestamp=timestamp)
        )
        infra_clouds.append(
            PointCloud(
                per_sensor_points[_SENSOR_INFRA], "infrastructure", timestamp=timestamp
            )
        )

        boxes = []
        for oi, obj in enumerate(objects):
            box = obj.box(t, track_id=oi + 1)
            n_veh = per_sensor_counts[_SENSOR_VEHICLE][oi]
            n_inf = per_sensor_counts[_SENSOR_INFRA][oi]
            box.attributes.update(
                {
                    "num_lidar_points": n_veh + n_inf,
                    "num_points_vehicle": n_veh,
                    "num_points_infra": n_inf,
                }
            )
            boxes.append(box)
        frames.append(Frame(index=fi, timestamp=timestamp, boxes=boxes))

        gnss_rng = _stream(config.seed, _TAG_GNSS, fi)
        # The coarse-alignment contract takes translation = target - source,
        # so the sample pair must satisfy infra_utm - vehicle_utm = sensor
        # position (plus noise) for the coarse pose to approximate truth.
        vehicle_utm = (
            _UTM_BASE
            - sensor_vehicle
            + gnss_rng.normal(0.0, config.gnss_sigma, size=3)
        )
        yaw_noise = math.radians(
            float(gnss_rng.normal(0.0, config.imu_sigma_deg))
        )
        gnss.append(
            GnssImuSample(
                vehicle_utm=vehicle_utm,
                infra_utm=_UTM_BASE.copy(),
                imu_rotation=Quaternion.from_yaw(config.vehicle_yaw + yaw_noise),
            )
        )

    labels = Sequence(id=f"synth-{config.seed}", frames=frames)
    return SynthScene(
        vehicle_clouds=vehicle_clouds,
        infra_clouds=infra_clouds,
        labels=labels,
        true_poses=true_poses,
        gnss=gnss,
    )
