"""Reading and writing labeled sequences as OpenLABEL-style JSON."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from coopkit.errors import InvalidQuaternionError, ParseError
from coopkit.geometry import Box3D, Quaternion
from coopkit.openlabel.model import Frame, Sequence

logger = logging.getLogger(__name__)

# Attribute groups in the wire format, in the order save_openlabel emits them.
_ATTR_GROUPS = ("boolean", "num", "text", "vec")

_FRAME_KEYS = {"frame_properties", "objects"}
_CUBOID_KEYS = {"name", "val", "attributes"}


def _require(cond: bool, msg: str, path: str):
    if not cond:
        raise ParseError(msg, path)


def _as_track_id(key: str) -> int | str:
    return int(key) if key.lstrip("-").isdigit() else key


def _parse_attributes(raw: Any, path: str) -> dict[str, Any]:
    _require(isinstance(raw, dict), "attributes must be an object", path)
    out: dict[str, Any] = {}
    for group in _ATTR_GROUPS:
        for i, item in enumerate(raw.get(group, [])):
            _require(isinstance(item, dict) and "name" in item and "val" in item,
                     "attribute entries need name and val", f"{path}.{group}[{i}]")
            out[item["name"]] = item["val"]
    unknown = set(raw) - set(_ATTR_GROUPS)
    _require(not unknown, f"unknown attribute groups {sorted(unknown)}", path)
    return out


def _parse_cuboid(raw: Any, track_id: int | str, category: str, path: str) -> tuple[Box3D, dict]:
    _require(isinstance(raw, dict), "cuboid must be an object", path)
    val = raw.get("val")
    _require(isinstance(val, list) and len(val) == 10,
             "cuboid val must hold 10 numbers (center, quaternion xyzw, size)", f"{path}.val")
    try:
        nums = [float(v) for v in val]
    except (TypeError, ValueError):
        raise ParseError("cuboid val entries must be numeric", f"{path}.val") from None
    try:
        quat = Quaternion(*nums[3:7])
    except InvalidQuaternionError as e:
        raise ParseError(f"bad orientation quaternion: {e}", f"{path}.val") from None
    yaw = quat.yaw()
    if quat.angle_to(Quaternion.from_yaw(yaw)) > 1e-6:
        logger.warning("dropping roll/pitch from box orientation at %s", path)
    attrs = _parse_attributes(raw.get("attributes", {}), f"{path}.attributes")
    score = attrs.pop("score", None)
    if score is not None:
        _require(isinstance(score, (int, float)) and 0.0 <= score <= 1.0,
                 f"score {score!r} outside [0, 1]", f"{path}.attributes")
    try:
        box = Box3D(
            np.array(nums[0:3]),
            np.array(nums[7:10]),
            yaw,
            category=category,
            track_id=track_id,
            score=None if score is None else float(score),
            attributes=attrs,
        )
    except ValueError as e:
        raise ParseError(str(e), f"{path}.val") from None
    extras: dict[str, Any] = {k: raw[k] for k in raw if k not in _CUBOID_KEYS}
    extra_rec: dict[str, Any] = {"val": list(val)}
    if extras:
        extra_rec["cuboid"] = extras
    if raw.get("name") is not None:
        extra_rec["name"] = raw["name"]
    return box, extra_rec


def _parse_frame(key: str, raw: Any, catalog: dict[str, dict], path: str) -> Frame:
    _require(key.lstrip("-").isdigit(), f"frame key {key!r} is not an integer", path)
    _require(isinstance(raw, dict), "frame must be an object", path)
    index = int(key)
    props = raw.get("frame_properties", {})
    _require(isinstance(props, dict), "frame_properties must be an object", f"{path}.frame_properties")
    timestamp = props.get("timestamp")
    if timestamp is not None:
        _require(isinstance(timestamp, int) and not isinstance(timestamp, bool),
                 "timestamp must be integer microseconds", f"{path}.frame_properties.timestamp")
    frame = Frame(
        index=index,
        timestamp=timestamp,
        extra={k: raw[k] for k in raw if k not in _FRAME_KEYS},
        properties_extra={k: props[k] for k in props if k != "timestamp"},
    )
    objects = raw.get("objects", {})
    _require(isinstance(objects, dict), "frame objects must be an object", f"{path}.objects")
    for okey, entry in objects.items():
        opath = f"{path}.objects.{okey}"
        _require(isinstance(entry, dict), "frame object must be an object", opath)
        cat_entry = catalog.get(okey)
        _require(cat_entry is not None, f"object {okey!r} missing from the catalog", opath)
        category = cat_entry.get("type")
        _require(isinstance(category, str), f"object {okey!r} has no type", opath)
        try:
            track_id = _as_track_id(okey)
            odata = entry.get("object_data", {})
            _require(isinstance(odata, dict), "object_data must be an object", f"{opath}.object_data")
            cuboids = odata.get("cuboid", [])
            _require(isinstance(cuboids, list), "cuboid must be a list", f"{opath}.object_data.cuboid")
            entry_extras = {k: entry[k] for k in entry if k != "object_data"}
            odata_extras = {k: odata[k] for k in odata if k != "cuboid"}
            for i, cub in enumerate(cuboids):
                box, extra_rec = _parse_cuboid(cub, track_id, category,
                                               f"{opath}.object_data.cuboid[{i}]")
                if i == 0:
                    if entry_extras:
                        extra_rec["entry"] = entry_extras
                    if odata_extras:
                        extra_rec["object_data"] = odata_extras
                frame.boxes.append(box)
                frame.cuboid_extras.append(extra_rec)
        except ParseError:
            raise
        except ValueError as e:
            raise ParseError(str(e), opath) from None
    return frame


def load_openlabel(source: str | Path | dict) -> Sequence:
    """Load a labeled sequence from a JSON file, path, or parsed dict.

    Unrecognized fields at every level are kept on the returned Sequence so
    that save_openlabel can reproduce the input. Malformed structure raises
    ParseError naming the JSON path of the problem.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            with open(path, "rb") as f:
                root = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from None
        default_id = path.stem
    else:
        root = source
        default_id = "sequence"
    _require(isinstance(root, dict), "top level must be an object", "$")
    ol = root.get("openlabel")
    _require(isinstance(ol, dict), "missing openlabel root object", "$.openlabel")

    metadata = ol.get("metadata", {})
    _require(isinstance(metadata, dict), "metadata must be an object", "$.openlabel.metadata")
    catalog = ol.get("objects", {})
    _require(isinstance(catalog, dict), "objects must be an object", "$.openlabel.objects")
    for okey, entry in catalog.items():
        _require(isinstance(entry, dict), "catalog entry must be an object", f"$.openlabel.objects.{okey}")

    seq = Sequence(
        id=str(metadata.get("name", default_id)),
        metadata=metadata,
        streams=ol.get("streams", {}),
        coordinate_systems=ol.get("coordinate_systems", {}),
        objects=catalog,
        extra={k: ol[k] for k in ol
               if k not in {"metadata", "streams", "coordinate_systems", "objects", "frames"}},
        root_extra={k: root[k] for k in root if k != "openlabel"},
    )
    frames_raw = ol.get("frames", {})
    _require(isinstance(frames_raw, dict), "frames must be an object", "$.openlabel.frames")
    keys = list(frames_raw)
    for key in keys:
        _require(key.lstrip("-").isdigit(), f"frame key {key!r} is not an integer",
                 f"$.openlabel.frames.{key}")
    for key in sorted(keys, key=int):
        seq.frames.append(
            _parse_frame(key, frames_raw[key], catalog, f"$.openlabel.frames.{key}")
        )
    return seq


def _attributes_to_wire(attrs: dict[str, Any], score: float | None) -> dict[str, list]:
    groups: dict[str, list] = {g: [] for g in _ATTR_GROUPS}
    items = dict(attrs)
    if score is not None:
        items["score"] = float(score)
    for name, val in items.items():
        if isinstance(val, bool):
            groups["boolean"].append({"name": name, "val": val})
        elif isinstance(val, (int, float)):
            groups["num"].append({"name": name, "val": val})
        elif isinstance(val, (list, tuple)):
            groups["vec"].append({"name": name, "val": list(val)})
        else:
            groups["text"].append({"name": name, "val": str(val)})
    return {g: v for g, v in groups.items() if v}


def _box_to_cuboid(box: Box3D, extra_rec: dict, key: str) -> dict:
    q = Quaternion.from_yaw(box.yaw)
    val = (
        [float(v) for v in box.center]
        + [q.x, q.y, q.z, q.w]
        + [float(v) for v in box.dimensions]
    )
    # Re-emit the loaded numbers bit for bit while the box is unedited;
    # regenerating the quaternion from yaw can drift by one ulp.
    loaded_val = extra_rec.get("val")
    if loaded_val is not None and np.allclose([float(v) for v in loaded_val], val, atol=1e-9):
        val = loaded_val
    cuboid: dict[str, Any] = {
        "name": extra_rec.get("name", f"box-{key}"),
        "val": val,
    }
    wire_attrs = _attributes_to_wire(box.attributes, box.score)
    if wire_attrs:
        cuboid["attributes"] = wire_attrs
    cuboid.update(extra_rec.get("cuboid", {}))
    return cuboid


def save_openlabel(seq: Sequence, path: str | Path | None = None) -> dict:
    """Serialize a Sequence to an OpenLABEL-style dict, optionally to a file."""
    catalog: dict[str, dict] = {k: v for k, v in seq.objects.items()}
    auto_counter = 0

    frames_out: dict[str, dict] = {}
    for frame in seq.frames:
        entries: dict[str, dict] = {}
        entry_extras: dict[str, dict] = {}
        odata_extras: dict[str, dict] = {}
        for i, box in enumerate(frame.boxes):
            extra_rec = frame.cuboid_extras[i] if i < len(frame.cuboid_extras) else {}
            if box.track_id is None:
                key = f"u{auto_counter}"
                auto_counter += 1
            else:
                key = str(box.track_id)
            if key not in catalog:
                catalog[key] = {"name": f"{box.category}-{key}", "type": box.category}
            entries.setdefault(key, {"object_data": {"cuboid": []}})
            entries[key]["object_data"]["cuboid"].append(_box_to_cuboid(box, extra_rec, key))
            if "entry" in extra_rec:
                entry_extras[key] = extra_rec["entry"]
            if "object_data" in extra_rec:
                odata_extras[key] = extra_rec["object_data"]
        for key, extras in odata_extras.items():
            entries[key]["object_data"].update(extras)
        for key, extras in entry_extras.items():
            entries[key].update(extras)

        frame_dict: dict[str, Any] = {}
        if frame.timestamp is not None or frame.properties_extra:
            props: dict[str, Any] = {}
            if frame.timestamp is not None:
                props["timestamp"] = int(frame.timestamp)
            props.update(frame.properties_extra)
            frame_dict["frame_properties"] = props
        if entries:
            frame_dict["objects"] = entries
        frame_dict.update(frame.extra)
        frames_out[str(frame.index)] = frame_dict

    ol: dict[str, Any] = {}
    if seq.metadata:
        ol["metadata"] = seq.metadata
    if seq.coordinate_systems:
        ol["coordinate_systems"] = seq.coordinate_systems
    if seq.streams:
        ol["streams"] = seq.streams
    if catalog:
        ol["objects"] = catalog
    ol["frames"] = frames_out
    ol.update(seq.extra)
    root: dict[str, Any] = {"openlabel": ol}
    root.update(seq.root_extra)
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(root, f, indent=2)
            f.write("\n")
    return root
