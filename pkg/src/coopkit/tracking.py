"""Multi-object tracking of 3D boxes with per-frame Kalman filters.

Follows the classic tracking-by-detection recipe: predict every live
track one frame ahead with a constant-velocity model, associate
detections to predictions by BEV center distance with an optimal gated
assignment, then spawn tracks for leftover detections and retire tracks
that have gone unseen for too long. Track ids are assigned once and
never reused, so downstream identity metrics can trust them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import gated_assignment
from .geometry import Box3D
from .geometry.boxes import wrap_angle

__all__ = ["TrackerParams", "Tracker", "track_sequence"]

# State layout: [x, y, z, yaw, l, w, h, vx, vy, vz].
_STATE_DIM = 10
_MEAS_DIM = 7


@dataclass(frozen=True)
class TrackerParams:
    """Tuning knobs for the tracker.

    gate_dist: maximum BEV center distance (meters) for associating a
        detection with a predicted track.
    max_age: number of consecutive missed frames after which a track
        is dropped.
    min_hits: matches required before a track appears in the output.
    category_aware: when True, detections only associate with tracks
        of the same category.
    """

    gate_dist: float = 5.0
    max_age: int = 3
    min_hits: int = 2
    category_aware: bool = True
    process_var: float = 0.01
    measurement_var: float = 0.01
    initial_velocity_var: float = 100.0

    def __post_init__(self) -> None:
        if self.gate_dist <= 0:
            raise ValueError(f"gate_dist must be positive, got {self.gate_dist}")
        if self.max_age < 0:
            raise ValueError(f"max_age must be >= 0, got {self.max_age}")
        if self.min_hits < 1:
            raise ValueError(f"min_hits must be >= 1, got {self.min_hits}")
        for name in ("process_var", "measurement_var", "initial_velocity_var"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _transition_matrix() -> np.ndarray:
    f = np.eye(_STATE_DIM)
    f[0, 7] = f[1, 8] = f[2, 9] = 1.0  # dt is one frame
    return f


def _measurement_matrix() -> np.ndarray:
    h = np.zeros((_MEAS_DIM, _STATE_DIM))
    h[:, :_MEAS_DIM] = np.eye(_MEAS_DIM)
    return h


@dataclass
class _Track:
    track_id: int
    category: str
    state: np.ndarray
    covariance: np.ndarray
    score: float
    hits: int = 1
    time_since_update: int = 0

    @classmethod
    def from_box(cls, box: Box3D, track_id: int, params: TrackerParams) -> _Track:
        state = np.zeros(_STATE_DIM)
        state[:3] = box.center
        state[3] = box.yaw
        state[4:7] = box.dimensions
        cov = np.eye(_STATE_DIM) * 10.0
        cov[7:, 7:] = np.eye(3) * params.initial_velocity_var
        return cls(
            track_id=track_id,
            category=box.category,
            state=state,
            covariance=cov,
            score=box.score if box.score is not None else 0.0,
        )

    def predict(self, f: np.ndarray, q: np.ndarray) -> None:
        self.state = f @ self.state
        self.state[3] = wrap_angle(self.state[3])
        self.covariance = f @ self.covariance @ f.T + q
        self.time_since_update += 1

    def update(self, box: Box3D, h: np.ndarray, r: np.ndarray) -> None:
        z = np.concatenate([box.center, [box.yaw], box.dimensions])
        residual = z - h @ self.state
        # Wrap the yaw residual so a detection at +3.1 rad pulls a track
        # at -3.1 rad across the seam instead of spinning it the long way.
        residual[3] = wrap_angle(residual[3])
        s = h @ self.covariance @ h.T + r
        gain = self.covariance @ h.T @ np.linalg.inv(s)
        self.state = self.state + gain @ residual
        self.state[3] = wrap_angle(self.state[3])
        self.covariance = (np.eye(_STATE_DIM) - gain @ h) @ self.covariance
        self.score = box.score if box.score is not None else self.score
        self.hits += 1
        self.time_since_update = 0

    def to_box(self) -> Box3D:
        return Box3D(
            center=self.state[:3].copy(),
            dimensions=np.maximum(self.state[4:7], 1e-6),
            yaw=float(self.state[3]),
            category=self.category,
            track_id=self.track_id,
            score=self.score,
        )


class Tracker:
    """Stateful tracker fed one frame of detections at a time."""

    def __init__(self, params: TrackerParams | None = None) -> None:
        self.params = params or TrackerParams()
        self._tracks: list[_Track] = []
        self._next_id = 1
        self._f = _transition_matrix()
        self._h = _measurement_matrix()
        self._q = np.eye(_STATE_DIM) * self.params.process_var
        self._r = np.eye(_MEAS_DIM) * self.params.measurement_var

    @property
    def active_track_ids(self) -> list[int]:
        return [t.track_id for t in self._tracks]

    def step(self, detections: list[Box3D]) -> list[Box3D]:
        """Advance one frame and return the confirmed tracked boxes.

        A box is emitted only for tracks matched in this frame that
        have accumulated at least ``min_hits`` matches, so one-frame
        ghosts never reach the output.
        """
        for track in self._tracks:
            track.predict(self._f, self._q)

        matches, unmatched_dets = self._associate(detections)
        for track_idx, det_idx in matches:
            self._tracks[track_idx].update(detections[det_idx], self._h, self._r)
        for det_idx in unmatched_dets:
            self._tracks.append(
                _Track.from_box(detections[det_idx], self._next_id, self.params)
            )
            self._next_id += 1

        self._tracks = [
            t for t in self._tracks if t.time_since_update <= self.params.max_age
        ]
        return [
            t.to_box()
            for t in self._tracks
            if t.time_since_update == 0 and t.hits >= self.params.min_hits
        ]

    def _associate(
        self, detections: list[Box3D]
    ) -> tuple[list[tuple[int, int]], list[int]]:
        if not self._tracks or not detections:
            return [], list(range(len(detections)))
        cost = np.zeros((len(self._tracks), len(detections)))
        for i, track in enumerate(self._tracks):
            for j, det in enumerate(detections):
                dx = track.state[0] - det.center[0]
                dy = track.state[1] - det.center[1]
                cost[i, j] = np.hypot(dx, dy)
                if self.params.category_aware and track.category != det.category:
                    cost[i, j] = np.inf
        matches = gated_assignment(cost, self.params.gate_dist)
        matched_dets = {j for _, j in matches}
        unmatched = [j for j in range(len(detections)) if j not in matched_dets]
        return matches, unmatched


def track_sequence(
    per_frame_detections: list[list[Box3D]],
    params: TrackerParams | None = None,
) -> list[list[Box3D]]:
    """Run a fresh tracker over a whole sequence of detection lists."""
    tracker = Tracker(params)
    return [tracker.step(frame) for frame in per_frame_detections]
