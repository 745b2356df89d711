"""Unit quaternions in (x, y, z, w) order and spherical interpolation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from coopkit.errors import InvalidQuaternionError

# Inputs farther than this from unit norm are rejected; anything closer is
# renormalized so downstream code can rely on |q| = 1 to within 1e-9.
_NORM_TOL = 1e-6

# Above this |dot| the arc is too short for a stable sin division and slerp
# degrades to normalized linear interpolation.
_NLERP_DOT = 1.0 - 1e-6


@dataclass(frozen=True)
class Quaternion:
    """Rotation as a unit quaternion, components ordered (x, y, z, w)."""

    x: float
    y: float
    z: float
    w: float

    def __post_init__(self):
        n = math.sqrt(self.x**2 + self.y**2 + self.z**2 + self.w**2)
        if abs(n - 1.0) > _NORM_TOL:
            raise InvalidQuaternionError(f"norm {n:.6g} is not within {_NORM_TOL} of 1")
        object.__setattr__(self, "x", self.x / n)
        object.__setattr__(self, "y", self.y / n)
        object.__setattr__(self, "z", self.z / n)
        object.__setattr__(self, "w", self.w / n)

    @classmethod
    def identity(cls) -> Quaternion:
        return cls(0.0, 0.0, 0.0, 1.0)

    @classmethod
    def normalized(cls, x: float, y: float, z: float, w: float) -> Quaternion:
        """Build from components of arbitrary scale (e.g. solver output)."""
        n = math.sqrt(x * x + y * y + z * z + w * w)
        if n < 1e-12:
            raise InvalidQuaternionError("cannot normalize a near-zero quaternion")
        return cls(x / n, y / n, z / n, w / n)

    @classmethod
    def from_axis_angle(cls, axis: np.ndarray, angle: float) -> Quaternion:
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise InvalidQuaternionError("rotation axis must be nonzero")
        s = math.sin(angle / 2.0) / n
        return cls(axis[0] * s, axis[1] * s, axis[2] * s, math.cos(angle / 2.0))

    @classmethod
    def from_yaw(cls, yaw: float) -> Quaternion:
        return cls(0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0))

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> Quaternion:
        """Convert a 3x3 rotation matrix, branching on the largest trace term."""
        m = np.asarray(mat, dtype=float)
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2.0
            return cls.normalized(
                (m[2, 1] - m[1, 2]) / s,
                (m[0, 2] - m[2, 0]) / s,
                (m[1, 0] - m[0, 1]) / s,
                0.25 * s,
            )
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(m[i, i] - m[j, j] - m[k, k] + 1.0) * 2.0
        xyz = [0.0, 0.0, 0.0]
        xyz[i] = 0.25 * s
        xyz[j] = (m[j, i] + m[i, j]) / s
        xyz[k] = (m[k, i] + m[i, k]) / s
        return cls.normalized(xyz[0], xyz[1], xyz[2], (m[k, j] - m[j, k]) / s)

    def to_matrix(self) -> np.ndarray:
        x, y, z, w = self.x, self.y, self.z, self.w
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    def to_axis_angle(self) -> tuple[np.ndarray, float]:
        """Return (unit axis, angle in [0, pi]); axis is +z for zero rotation."""
        w = min(1.0, max(-1.0, self.w))
        angle = 2.0 * math.acos(abs(w))
        v = np.array([self.x, self.y, self.z])
        if w < 0:
            v = -v
        n = np.linalg.norm(v)
        if n < 1e-12:
            return np.array([0.0, 0.0, 1.0]), 0.0
        return v / n, angle

    @property
    def components(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w])

    def multiply(self, other: Quaternion) -> Quaternion:
        """Hamilton product; composing rotations applies ``other`` first."""
        x1, y1, z1, w1 = self.x, self.y, self.z, self.w
        x2, y2, z2, w2 = other.x, other.y, other.z, other.w
        return Quaternion.normalized(
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        )

    def conjugate(self) -> Quaternion:
        return Quaternion(-self.x, -self.y, -self.z, self.w)

    # For unit quaternions the inverse is the conjugate.
    inverse = conjugate

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=float)
        return v @ self.to_matrix().T

    def yaw(self) -> float:
        """Heading angle about +z, in [-pi, pi)."""
        siny = 2.0 * (self.w * self.z + self.x * self.y)
        cosy = 1.0 - 2.0 * (self.y * self.y + self.z * self.z)
        a = math.atan2(siny, cosy)
        return a if a < math.pi else a - 2 * math.pi

    def angle_to(self, other: Quaternion) -> float:
        """Shortest rotation angle to ``other``; q and -q are 0 apart.

        Uses atan2 on the relative quaternion, which keeps full precision
        for tiny angles where acos of the dot product would not.
        """
        r = self.conjugate().multiply(other)
        return 2.0 * math.atan2(math.sqrt(r.x**2 + r.y**2 + r.z**2), abs(r.w))

    def same_rotation(self, other: Quaternion, tol: float = 1e-9) -> bool:
        return self.angle_to(other) <= tol


def slerp(q0: Quaternion, q1: Quaternion, t: float) -> Quaternion:
    """Interpolate along the shortest great-circle arc from q0 to q1.

    t=0 returns q0 and t=1 returns q1 (up to sign, which is the same
    rotation). Intermediate t sweeps the relative angle linearly.
    """
    for q in (q0, q1):
        n = float(np.linalg.norm(q.components))
        if abs(n - 1.0) > _NORM_TOL:
            raise InvalidQuaternionError(f"norm {n:.6g} is not within {_NORM_TOL} of 1")
    a = q0.components
    b = q1.components.copy()
    dot = float(np.dot(a, b))
    if dot < 0.0:
        # q and -q are the same rotation; flip to take the short way around.
        b = -b
        dot = -dot
    if dot > _NLERP_DOT:
        out = a + t * (b - a)
        return Quaternion.normalized(*out)
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    out = (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b
    return Quaternion.normalized(*out)
