"""In-memory form of a labeled multi-sensor sequence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from coopkit.geometry import Box3D


@dataclass
class Frame:
    """One time step: a timestamp in integer microseconds plus its boxes.

    ``cuboid_extras`` carries unrecognized per-box wire fields so a loaded
    file can be written back without loss; it is index-aligned with
    ``boxes`` and may be shorter (missing entries mean no extras).
    """

    index: int
    timestamp: int | None = None
    boxes: list[Box3D] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    properties_extra: dict[str, Any] = field(default_factory=dict)
    cuboid_extras: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class Sequence:
    """An ordered run of frames with sequence-level metadata.

    ``objects`` is the per-track catalog keyed by track id string. The
    ``*_extra`` dicts preserve wire fields this toolkit does not interpret.
    """

    id: str
    frames: list[Frame] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)
    streams: dict[str, Any] = field(default_factory=dict)
    coordinate_systems: dict[str, Any] = field(default_factory=dict)
    objects: dict[str, dict[str, Any]] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)
    root_extra: dict[str, Any] = field(default_factory=dict)

    def track_ids(self) -> list[int | str]:
        seen: dict[int | str, None] = {}
        for frame in self.frames:
            for box in frame.boxes:
                if box.track_id is not None and box.track_id not in seen:
                    seen[box.track_id] = None
        return list(seen)
