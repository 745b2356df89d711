"""Lossy exchange with KITTI-style per-frame label text files."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from coopkit.errors import ParseError
from coopkit.geometry import Box3D
from coopkit.openlabel.model import Frame, Sequence

logger = logging.getLogger(__name__)

_TO_KITTI = {
    "car": "Car",
    "van": "Van",
    "truck": "Truck",
    "pedestrian": "Pedestrian",
    "bicycle": "Cyclist",
    "bus": "Misc",
    "trailer": "Misc",
    "motorcycle": "Misc",
    "other": "Misc",
}
_FROM_KITTI = {
    "Car": "car",
    "Van": "van",
    "Truck": "truck",
    "Pedestrian": "pedestrian",
    "Person_sitting": "pedestrian",
    "Cyclist": "bicycle",
    "Tram": "other",
    "Misc": "other",
    "DontCare": "other",
}

# Categories whose KITTI name maps back to a different label.
_LOSSY_CATEGORIES = {c for c, k in _TO_KITTI.items() if _FROM_KITTI[k] != c}


def _format_line(box: Box3D) -> str:
    l, w, h = box.dimensions
    cx, cy, cz = box.center
    cols = [
        _TO_KITTI[box.category],
        "0.00", "0", "0.00",  # truncated, occluded, alpha: not tracked here
        "0.00", "0.00", "0.00", "0.00",  # no 2D box
        f"{h:.6f}", f"{w:.6f}", f"{l:.6f}",
        f"{cx:.6f}", f"{cy:.6f}", f"{cz - h / 2.0:.6f}",  # bottom center
        f"{box.yaw:.6f}",
    ]
    if box.score is not None:
        cols.append(f"{box.score:.6f}")
    return " ".join(cols)


def to_kitti(seq: Sequence, out_dir: str | Path) -> list[Path]:
    """Write one text file per frame, named by frame index.

    Track ids, timestamps, and attributes have no place in this format and
    are dropped; categories without an exact KITTI name degrade to Misc.
    Both losses are logged once per export.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lossy = set()
    dropped_meta = False
    paths = []
    for frame in seq.frames:
        lines = []
        for box in frame.boxes:
            lines.append(_format_line(box))
            if box.category in _LOSSY_CATEGORIES:
                lossy.add(box.category)
            if box.track_id is not None or box.attributes:
                dropped_meta = True
        path = out_dir / f"{frame.index:06d}.txt"
        path.write_text("".join(line + "\n" for line in lines), encoding="ascii")
        paths.append(path)
    if lossy:
        logger.warning("categories %s have no exact KITTI name and degrade on round trip",
                       sorted(lossy))
    if dropped_meta:
        logger.warning("track ids and attributes are dropped by the KITTI export")
    return paths


def from_kitti(label_dir: str | Path, sequence_id: str = "kitti-import") -> Sequence:
    """Read KITTI-style label files back into a Sequence (no timestamps)."""
    label_dir = Path(label_dir)
    seq = Sequence(id=sequence_id, metadata={"schema_version": "1.0.0", "name": sequence_id})
    for path in sorted(label_dir.glob("*.txt")):
        try:
            index = int(path.stem)
        except ValueError:
            raise ParseError(f"label file name {path.name!r} is not a frame index", str(path)) from None
        frame = Frame(index=index)
        for line_no, line in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
            if not line.strip():
                continue
            cols = line.split()
            if len(cols) not in (15, 16):
                raise ParseError(
                    f"expected 15 or 16 columns, got {len(cols)}", f"{path}:{line_no}"
                )
            kind = cols[0]
            if kind not in _FROM_KITTI:
                raise ParseError(f"unknown object type {kind!r}", f"{path}:{line_no}")
            try:
                h, w, l = (float(c) for c in cols[8:11])
                x, y, z = (float(c) for c in cols[11:14])
                yaw = float(cols[14])
                score = float(cols[15]) if len(cols) == 16 else None
            except ValueError:
                raise ParseError("non-numeric field", f"{path}:{line_no}") from None
            frame.boxes.append(
                Box3D(
                    np.array([x, y, z + h / 2.0]),
                    np.array([l, w, h]),
                    yaw,
                    category=_FROM_KITTI[kind],
                    score=score,
                )
            )
        seq.frames.append(frame)
    return seq
