"""HTTP API for the browser annotator, versioned under /v1.

Every numeric operation delegates to the geometry module; handlers only
move data between the wire format and the store. Label writes go through
optimistic concurrency (the client names the revision it edited), reads
are lock-free.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import Body, FastAPI, Query, Response
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field
from scipy.spatial import cKDTree

from coopkit import __version__
from coopkit.errors import ConcurrentWriteError, EstimationError
from coopkit.geometry import (
    Box3D,
    CameraCalibration,
    Pose,
    Quaternion,
    box_corners,
    fit_oriented_box,
    project_points,
    slerp,
)
from coopkit.openlabel import Frame
from coopkit.service.store import SequenceStore

CHUNK_MAGIC = b"CPC1"
CHUNK_POINTS = 65536

# The wireframe drawn by every client: bottom loop, top loop, verticals.
BOX_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
]


class ApiError(Exception):
    def __init__(self, status: int, detail: str, extra: dict | None = None):
        super().__init__(detail)
        self.status = status
        self.detail = detail
        self.extra = extra or {}


def encode_chunk(points: np.ndarray, intensity: np.ndarray | None = None) -> bytes:
    """Pack points into one wire chunk.

    Header: magic ``CPC1``, uint32 little-endian point count, uint8 field
    flags (bit 0: intensity present). Body: per point, float32 little-endian
    x, y, z and, when flagged, intensity.
    """
    n = len(points)
    flags = 1 if intensity is not None else 0
    header = CHUNK_MAGIC + struct.pack("<IB", n, flags)
    if intensity is not None:
        body = np.column_stack([points, intensity]).astype("<f4").tobytes()
    else:
        body = np.ascontiguousarray(points, dtype="<f4").tobytes()
    return header + body


def decode_chunk(buf: bytes) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverse of encode_chunk; used by tests and kept next to the encoder."""
    if buf[:4] != CHUNK_MAGIC:
        raise ValueError("bad chunk magic")
    n, flags = struct.unpack("<IB", buf[4:9])
    width = 4 if flags & 1 else 3
    data = np.frombuffer(buf, dtype="<f4", offset=9, count=n * width)
    data = data.reshape(n, width).astype(np.float64)
    if flags & 1:
        return data[:, :3], data[:, 3]
    return data, None


def box_to_wire(box: Box3D) -> dict[str, Any]:
    return {
        "track_id": box.track_id,
        "category": box.category,
        "center": box.center.tolist(),
        "dimensions": box.dimensions.tolist(),
        "yaw": box.yaw,
        "score": box.score,
        "attributes": dict(box.attributes),
    }


class WireBox(BaseModel):
    track_id: int | str | None = None
    category: str = "other"
    center: list[float] = Field(min_length=3, max_length=3)
    dimensions: list[float] = Field(min_length=3, max_length=3)
    yaw: float
    score: float | None = None
    attributes: dict[str, Any] = Field(default_factory=dict)

    def to_box(self) -> Box3D:
        try:
            return Box3D(
                center=np.asarray(self.center, dtype=float),
                dimensions=np.asarray(self.dimensions, dtype=float),
                yaw=self.yaw,
                category=self.category,
                track_id=self.track_id,
                score=self.score,
                attributes=dict(self.attributes),
            )
        except ValueError as exc:
            raise ApiError(422, f"invalid box: {exc}") from exc


class PutLabelsBody(BaseModel):
    base_revision: int = Field(ge=0)
    boxes: list[WireBox]
    author: str = "anonymous"


class Keyframe(BaseModel):
    frame: int = Field(ge=0)
    box: WireBox


class InterpolateBody(BaseModel):
    track_id: int | str
    start: Keyframe
    end: Keyframe
    frames: list[int] | None = None


class AutofitBody(BaseModel):
    seed: list[float] = Field(min_length=3, max_length=3)
    radius: float = Field(gt=0)
    sensor: str | None = None


class CopyNextBody(BaseModel):
    track_ids: list[int | str] | None = None
    base_revision: int | None = None
    author: str = "anonymous"


def _grow_region(points: np.ndarray, seed: np.ndarray, radius: float) -> np.ndarray:
    """Indices reachable from the click through gaps of at most radius.

    The click rarely lands exactly on a stored point, so growth starts
    from the nearest point when that is within radius of the seed;
    otherwise the click counts as empty space.
    """
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    tree = cKDTree(points)
    dist, nearest = tree.query(seed)
    if dist > radius:
        return np.zeros(0, dtype=int)
    member = np.zeros(len(points), dtype=bool)
    frontier = [int(nearest)]
    member[frontier] = True
    while frontier:
        neighbor_lists = tree.query_ball_point(points[frontier], radius)
        fresh: set[int] = set()
        for neighbors in neighbor_lists:
            fresh.update(neighbors)
        frontier = [i for i in fresh if not member[i]]
        member[frontier] = True
    return np.flatnonzero(member)


def _calibration_from_wire(doc: dict, camera_id: str) -> CameraCalibration:
    try:
        extrinsics = None
        if doc.get("extrinsics"):
            e = doc["extrinsics"]
            extrinsics = Pose(
                Quaternion(*e["rotation"]),
                np.asarray(e["translation"], dtype=float),
                source_frame=e.get("source_frame", "infrastructure"),
                target_frame=e.get("target_frame", camera_id),
            )
        return CameraCalibration(
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            image_size=(int(doc["width"]), int(doc["height"])),
            k1=float(doc.get("k1", 0.0)),
            k2=float(doc.get("k2", 0.0)),
            k3=float(doc.get("k3", 0.0)),
            p1=float(doc.get("p1", 0.0)),
            p2=float(doc.get("p2", 0.0)),
            extrinsics=extrinsics,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ApiError(500, f"calibration for {camera_id!r} unreadable: {exc}")


def create_app(data_dir: str | Path) -> FastAPI:
    store = SequenceStore(data_dir)
    app = FastAPI(title="coopkit annotation service", version=__version__)

    @app.exception_handler(ApiError)
    async def _api_error(_, exc: ApiError):
        payload = {"detail": exc.detail, **exc.extra}
        return JSONResponse(status_code=exc.status, content=payload)

    def get_sequence(seq_id: str):
        try:
            return store.labels(seq_id)
        except KeyError:
            raise ApiError(404, f"unknown sequence {seq_id!r}")

    def get_frame(seq, seq_id: str, idx: int) -> Frame:
        if not 0 <= idx < len(seq.frames):
            raise ApiError(404, f"{seq_id} has no frame {idx}")
        return seq.frames[idx]

    @app.get("/v1/sequences")
    def list_sequences():
        out = []
        for seq_id in store.ids():
            seq, revision = store.labels(seq_id)
            out.append({
                "id": seq_id,
                "frames": len(seq.frames),
                "revision": revision,
                "sensors": store.sensors(seq_id),
            })
        return out

    @app.get("/v1/sequences/{seq_id}/frames/{idx}")
    def frame_payload(seq_id: str, idx: int, lod: float = Query(1.0, gt=0.0, le=1.0)):
        seq, revision = get_sequence(seq_id)
        frame = get_frame(seq, seq_id, idx)
        clouds = {}
        for sensor in store.sensors(seq_id):
            try:
                cloud = store.cloud(seq_id, idx, sensor)
            except KeyError:
                continue
            n = _lod_count(len(cloud.points), lod)
            clouds[sensor] = {
                "url": f"/v1/sequences/{seq_id}/frames/{idx}/cloud/{sensor}",
                "points": n,
                "chunks": max(1, math.ceil(n / CHUNK_POINTS)) if n else 0,
                "chunk_points": CHUNK_POINTS,
            }
        images = [
            {"camera": camera,
             "url": f"/v1/sequences/{seq_id}/images/{camera}/{name}"}
            for camera, name in store.frame_images(seq_id, idx)
        ]
        return {
            "sequence": seq_id,
            "index": idx,
            "timestamp": frame.timestamp,
            "revision": revision,
            "labels": [box_to_wire(b) for b in frame.boxes],
            "clouds": clouds,
            "images": images,
            "calibrations": store.calibrations(seq_id),
        }

    @app.get("/v1/sequences/{seq_id}/frames/{idx}/cloud/{sensor}")
    def cloud_chunk(seq_id: str, idx: int, sensor: str,
                    lod: float = Query(1.0, gt=0.0, le=1.0),
                    chunk: int = Query(0, ge=0)):
        try:
            cloud = store.cloud(seq_id, idx, sensor)
        except KeyError as exc:
            raise ApiError(404, str(exc))
        points, intensity = cloud.points, cloud.intensity
        keep = _lod_count(len(points), lod)
        if keep < len(points):
            idx_keep = np.linspace(0, len(points), keep,
                                   endpoint=False).astype(int)
            points = points[idx_keep]
            intensity = intensity[idx_keep] if intensity is not None else None
        n_chunks = max(1, math.ceil(len(points) / CHUNK_POINTS)) if len(points) else 1
        if chunk >= n_chunks:
            raise ApiError(404, f"chunk {chunk} out of range ({n_chunks} chunks)")
        lo, hi = chunk * CHUNK_POINTS, (chunk + 1) * CHUNK_POINTS
        body = encode_chunk(
            points[lo:hi],
            intensity[lo:hi] if intensity is not None else None,
        )
        return Response(
            content=body,
            media_type="application/octet-stream",
            headers={
                "X-Total-Points": str(len(points)),
                "X-Chunk-Count": str(n_chunks),
                "X-Chunk-Index": str(chunk),
            },
        )

    @app.get("/v1/sequences/{seq_id}/images/{camera}/{filename}")
    def image_file(seq_id: str, camera: str, filename: str):
        try:
            return FileResponse(store.image_path(seq_id, camera, filename))
        except KeyError as exc:
            raise ApiError(404, str(exc))

    @app.put("/v1/sequences/{seq_id}/frames/{idx}/labels")
    def put_labels(seq_id: str, idx: int, body: PutLabelsBody):
        seq, _ = get_sequence(seq_id)
        get_frame(seq, seq_id, idx)
        boxes = [wire.to_box() for wire in body.boxes]
        # Re-read under the base the client named so the commit carries
        # exactly their edit on top of that state.
        try:
            base_seq, _ = store.labels(seq_id, body.base_revision)
        except KeyError:
            base_seq = seq
        base_seq.frames[idx].boxes = boxes
        base_seq.frames[idx].cuboid_extras = []
        try:
            revision = store.commit(seq_id, body.base_revision, base_seq,
                                    author=body.author)
        except ConcurrentWriteError as exc:
            latest_seq, latest = store.labels(seq_id)
            raise ApiError(409, str(exc), extra={
                "latest_revision": latest,
                "labels": [box_to_wire(b)
                           for b in latest_seq.frames[idx].boxes],
            })
        return {"revision": revision}

    @app.post("/v1/sequences/{seq_id}/interpolate")
    def interpolate(seq_id: str, body: InterpolateBody):
        get_sequence(seq_id)
        f0, f1 = body.start.frame, body.end.frame
        if f0 >= f1:
            raise ApiError(422, f"start frame {f0} must precede end frame {f1}")
        for keyframe in (body.start, body.end):
            if keyframe.box.track_id not in (None, body.track_id):
                raise ApiError(
                    422,
                    f"keyframe track id {keyframe.box.track_id!r} does not "
                    f"match request track id {body.track_id!r}")
        start_box, end_box = body.start.box.to_box(), body.end.box.to_box()
        targets = body.frames if body.frames is not None \
            else list(range(f0, f1 + 1))
        out = []
        for f in targets:
            if not f0 <= f <= f1:
                raise ApiError(422, f"frame {f} outside [{f0}, {f1}]")
            out.append({"frame": f,
                        "box": box_to_wire(_blend(start_box, end_box, f0, f1,
                                                  f, body.track_id))})
        return {"track_id": body.track_id, "boxes": out}

    @app.post("/v1/sequences/{seq_id}/frames/{idx}/autofit")
    def autofit(seq_id: str, idx: int, body: AutofitBody):
        seq, _ = get_sequence(seq_id)
        get_frame(seq, seq_id, idx)
        sensors = store.sensors(seq_id)
        sensor = body.sensor or ("infrastructure" if "infrastructure" in sensors
                                 else (sensors[0] if sensors else None))
        if sensor is None or sensor not in sensors:
            raise ApiError(404, f"no {body.sensor or 'point cloud'} data for {seq_id}")
        try:
            cloud = store.cloud(seq_id, idx, sensor)
        except KeyError as exc:
            raise ApiError(404, str(exc))
        region = _grow_region(cloud.points, np.asarray(body.seed, dtype=float),
                              body.radius)
        if len(region) < 5:
            raise ApiError(422,
                           f"only {len(region)} points near the seed; "
                           "need at least 5 to fit a box")
        try:
            box = fit_oriented_box(cloud.points[region])
        except EstimationError as exc:
            raise ApiError(422, str(exc))
        return {"box": box_to_wire(box), "points_used": int(len(region)),
                "sensor": sensor}

    @app.post("/v1/sequences/{seq_id}/frames/{idx}/copy-next")
    def copy_next(seq_id: str, idx: int, body: CopyNextBody):
        seq, revision = get_sequence(seq_id)
        get_frame(seq, seq_id, idx)
        if idx + 1 >= len(seq.frames):
            raise ApiError(404, f"frame {idx} is the last frame")
        base = body.base_revision if body.base_revision is not None else revision
        try:
            work, _ = store.labels(seq_id, base)
        except KeyError:
            raise ApiError(409, f"unknown base revision {base}",
                           extra={"latest_revision": revision})
        source = work.frames[idx].boxes
        wanted = None if body.track_ids is None else set(body.track_ids)
        copied = [b for b in source
                  if wanted is None or b.track_id in wanted]
        target = work.frames[idx + 1]
        keep_ids = {b.track_id for b in copied if b.track_id is not None}
        target.boxes = [b for b in target.boxes
                        if b.track_id not in keep_ids] + [
            Box3D(center=b.center.copy(), dimensions=b.dimensions.copy(),
                  yaw=b.yaw, category=b.category, track_id=b.track_id,
                  score=b.score, attributes=dict(b.attributes))
            for b in copied
        ]
        target.cuboid_extras = []
        try:
            new_revision = store.commit(seq_id, base, work, author=body.author)
        except ConcurrentWriteError as exc:
            raise ApiError(409, str(exc),
                           extra={"latest_revision": exc.latest_revision})
        return {"revision": new_revision, "copied": len(copied),
                "frame": idx + 1}

    @app.get("/v1/sequences/{seq_id}/frames/{idx}/project")
    def project(seq_id: str, idx: int, camera: str, track_id: str):
        seq, _ = get_sequence(seq_id)
        frame = get_frame(seq, seq_id, idx)
        calibrations = store.calibrations(seq_id)
        if camera not in calibrations:
            raise ApiError(404, f"unknown camera {camera!r}")
        calib = _calibration_from_wire(calibrations[camera], camera)
        box = _find_box(frame, track_id)
        if box is None:
            raise ApiError(404, f"no track {track_id!r} in frame {idx}")
        corners = box_corners(box)
        if calib.extrinsics is not None:
            corners = calib.extrinsics.apply(corners)
        pixels, in_front = project_points(corners, calib)
        edges = []
        for a, b in BOX_EDGES:
            if not (in_front[a] or in_front[b]):
                continue
            edges.append({
                "a": _pixel(pixels[a], in_front[a]),
                "b": _pixel(pixels[b], in_front[b]),
                "clipped": not (in_front[a] and in_front[b]),
            })
        return {
            "camera": camera,
            "track_id": box.track_id,
            "behind_camera": not bool(in_front.any()),
            "corners": [_pixel(pixels[i], in_front[i]) for i in range(8)],
            "in_front": [bool(v) for v in in_front],
            "edges": edges,
        }

    return app


def _lod_count(n: int, lod: float) -> int:
    return n if lod >= 1.0 else int(round(n * lod))


def _pixel(uv: np.ndarray, visible: bool) -> list[float] | None:
    return [float(uv[0]), float(uv[1])] if visible else None


def _find_box(frame: Frame, track_id: str) -> Box3D | None:
    for box in frame.boxes:
        if str(box.track_id) == str(track_id):
            return box
    return None


def _blend(start: Box3D, end: Box3D, f0: int, f1: int, f: int,
           track_id) -> Box3D:
    """Interpolated box at frame f; keyframes pass through unchanged."""
    if f == f0:
        return start
    if f == f1:
        return end
    t = (f - f0) / (f1 - f0)
    rot = slerp(Quaternion.from_yaw(start.yaw), Quaternion.from_yaw(end.yaw), t)
    center = start.center + t * (end.center - start.center)
    # Dimensions are a per-track constant, so intermediates take the end
    # keyframe's (a resize edits the whole track, newest wins).
    return Box3D(
        center=center,
        dimensions=end.dimensions.copy(),
        yaw=rot.yaw(),
        category=end.category,
        track_id=track_id,
        score=None,
        attributes=dict(end.attributes),
    )
