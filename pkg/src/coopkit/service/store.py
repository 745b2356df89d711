"""On-disk sequence store with append-only label revisions.

Layout under the data directory, one subdirectory per sequence:

    <id>/labels.json              shipped labels, revision 0
    <id>/vehicle/000000.pcd       per-frame clouds, one dir per sensor
    <id>/infrastructure/000000.pcd
    <id>/images/<camera>/000000.jpg
    <id>/calibrations.json        camera intrinsics + extrinsics (optional)
    <id>/revisions/000001.json    full label state per committed revision
    <id>/revisions/latest         pointer file, plain integer

Revision files are immutable once written and the pointer is swapped with
an atomic rename, so readers never need the writer lock.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
from pathlib import Path

from coopkit.errors import ConcurrentWriteError
from coopkit.geometry import PointCloud
from coopkit.openlabel import Sequence, load_openlabel, load_pcd, save_openlabel

SENSORS = ("vehicle", "infrastructure")


class SequenceStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"data directory not found: {self.root}")
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}

    def _lock(self, seq_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(seq_id, threading.Lock())

    def ids(self) -> list[str]:
        return sorted(
            d.name for d in self.root.iterdir()
            if d.is_dir() and (d / "labels.json").is_file()
        )

    def _dir(self, seq_id: str) -> Path:
        # Sequence ids come from URLs; refuse anything that could escape.
        if not seq_id or "/" in seq_id or seq_id in (".", ".."):
            raise KeyError(seq_id)
        d = self.root / seq_id
        if not (d / "labels.json").is_file():
            raise KeyError(seq_id)
        return d

    def latest_revision(self, seq_id: str) -> int:
        pointer = self._dir(seq_id) / "revisions" / "latest"
        if not pointer.is_file():
            return 0
        return int(pointer.read_text().strip())

    def _revision_path(self, seq_id: str, revision: int) -> Path:
        d = self._dir(seq_id)
        if revision == 0:
            return d / "labels.json"
        return d / "revisions" / f"{revision:06d}.json"

    def labels(self, seq_id: str, revision: int | None = None) -> tuple[Sequence, int]:
        if revision is None:
            revision = self.latest_revision(seq_id)
        path = self._revision_path(seq_id, revision)
        if not path.is_file():
            raise KeyError(f"{seq_id} has no revision {revision}")
        return load_openlabel(path), revision

    def commit(self, seq_id: str, base_revision: int, seq: Sequence,
               author: str = "anonymous") -> int:
        """Write the full label state as the next revision.

        Rejects the write when ``base_revision`` is not the latest, so a
        client editing a stale copy gets the conflict instead of silently
        overwriting someone else's work.
        """
        with self._lock(seq_id):
            latest = self.latest_revision(seq_id)
            if base_revision != latest:
                raise ConcurrentWriteError(
                    f"base revision {base_revision} is stale, latest is {latest}",
                    latest_revision=latest,
                )
            new_revision = latest + 1
            rev_dir = self._dir(seq_id) / "revisions"
            rev_dir.mkdir(exist_ok=True)

            doc = save_openlabel(seq)
            doc["revision_info"] = {
                "sequence": seq_id,
                "revision": new_revision,
                "author": author,
                "committed_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            }
            path = rev_dir / f"{new_revision:06d}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, path)

            pointer = rev_dir / "latest"
            tmp_pointer = rev_dir / "latest.tmp"
            tmp_pointer.write_text(f"{new_revision}\n", encoding="utf-8")
            os.replace(tmp_pointer, pointer)
            return new_revision

    def sensors(self, seq_id: str) -> list[str]:
        d = self._dir(seq_id)
        return [s for s in SENSORS if (d / s).is_dir()]

    def cloud(self, seq_id: str, frame_idx: int, sensor: str) -> PointCloud:
        if sensor not in SENSORS:
            raise KeyError(f"unknown sensor {sensor!r}")
        path = self._dir(seq_id) / sensor / f"{frame_idx:06d}.pcd"
        if not path.is_file():
            raise KeyError(f"{seq_id} frame {frame_idx} has no {sensor} cloud")
        return load_pcd(path, frame=sensor)

    def calibrations(self, seq_id: str) -> dict:
        path = self._dir(seq_id) / "calibrations.json"
        if not path.is_file():
            return {}
        return json.loads(path.read_text())

    def image_path(self, seq_id: str, camera: str, filename: str) -> Path:
        base = (self._dir(seq_id) / "images" / camera).resolve()
        path = (base / filename).resolve()
        if base not in path.parents or not path.is_file():
            raise KeyError(f"no image {camera}/{filename} in {seq_id}")
        return path

    def frame_images(self, seq_id: str, frame_idx: int) -> list[tuple[str, str]]:
        """(camera, filename) pairs whose stem matches the frame index."""
        images_dir = self._dir(seq_id) / "images"
        if not images_dir.is_dir():
            return []
        out = []
        stem = f"{frame_idx:06d}"
        for cam_dir in sorted(p for p in images_dir.iterdir() if p.is_dir()):
            for path in sorted(cam_dir.glob(f"{stem}.*")):
                out.append((cam_dir.name, path.name))
        return out
