"""Rigid transforms between named coordinate frames."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coopkit.errors import FrameMismatchError
from coopkit.geometry.quaternion import Quaternion, slerp


@dataclass(frozen=True)
class Pose:
    """Maps points from ``source_frame`` into ``target_frame``.

    Applying the pose computes R p + t. Frames are free-form strings; every
    operation that chains or mixes poses checks that they line up and raises
    FrameMismatchError otherwise.
    """

    rotation: Quaternion
    translation: np.ndarray
    source_frame: str
    target_frame: str

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, frame: str) -> Pose:
        return cls(Quaternion.identity(), np.zeros(3), frame, frame)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, source_frame: str, target_frame: str) -> Pose:
        m = np.asarray(mat, dtype=float)
        return cls(Quaternion.from_matrix(m[:3, :3]), m[:3, 3].copy(), source_frame, target_frame)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.to_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.to_matrix().T + self.translation

    def compose(self, inner: Pose) -> Pose:
        """Chain transforms: (self.compose(inner))(p) == self(inner(p))."""
        if inner.target_frame != self.source_frame:
            raise FrameMismatchError(
                f"cannot chain {inner.source_frame}->{inner.target_frame} "
                f"into {self.source_frame}->{self.target_frame}"
            )
        return Pose(
            self.rotation.multiply(inner.rotation),
            self.rotation.rotate(inner.translation) + self.translation,
            inner.source_frame,
            self.target_frame,
        )

    def invert(self) -> Pose:
        rot = self.rotation.conjugate()
        return Pose(rot, -rot.rotate(self.translation), self.target_frame, self.source_frame)


def interpolate_pose(p0: Pose, p1: Pose, t: float) -> Pose:
    """Blend two poses of the same frame pair: slerp rotation, lerp translation."""
    if (p0.source_frame, p0.target_frame) != (p1.source_frame, p1.target_frame):
        raise FrameMismatchError(
            f"cannot interpolate {p0.source_frame}->{p0.target_frame} "
            f"with {p1.source_frame}->{p1.target_frame}"
        )
    if not -1e-9 <= t <= 1.0 + 1e-9:
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")
    t = min(1.0, max(0.0, t))
    return Pose(
        slerp(p0.rotation, p1.rotation, t),
        p0.translation + t * (p1.translation - p0.translation),
        p0.source_frame,
        p0.target_frame,
    )
