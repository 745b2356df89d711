"""PCD v0.7 point cloud files, ascii and binary little-endian."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from coopkit.errors import ParseError
from coopkit.geometry import PointCloud

logger = logging.getLogger(__name__)

_HEADER_FIELDS = (
    "VERSION", "FIELDS", "SIZE", "TYPE", "COUNT",
    "WIDTH", "HEIGHT", "VIEWPOINT", "POINTS", "DATA",
)


def load_pcd(path: str | Path, frame: str = "lidar", timestamp: int | None = None) -> PointCloud:
    """Read x, y, z and optional intensity from a PCD file.

    Rows containing NaN are dropped; the count of dropped rows is logged as
    a warning. Raises ParseError on malformed headers or truncated data.
    """
    path = Path(path)
    raw = path.read_bytes()
    header: dict[str, str] = {}
    offset = 0
    line_no = 0
    while True:
        end = raw.find(b"\n", offset)
        if end < 0:
            raise ParseError("header has no DATA line", f"{path}:byte {offset}")
        line = raw[offset:end].decode("ascii", errors="replace").strip()
        offset = end + 1
        line_no += 1
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" ")
        header[key] = value
        if key == "DATA":
            break
        if key not in _HEADER_FIELDS:
            raise ParseError(f"unexpected header line {key!r}", f"{path}:{line_no}")

    for req in ("FIELDS", "POINTS", "DATA"):
        if req not in header:
            raise ParseError(f"header missing {req}", f"{path}:{line_no}")
    fields = header["FIELDS"].split()
    if fields[:3] != ["x", "y", "z"] or len(fields) > 4 or (len(fields) == 4 and fields[3] != "intensity"):
        raise ParseError(f"unsupported field layout {fields}", f"{path}:FIELDS")
    if "SIZE" in header and header["SIZE"].split() != ["4"] * len(fields):
        raise ParseError(f"only 4-byte floats supported, got SIZE {header['SIZE']}", f"{path}:SIZE")
    if "TYPE" in header and header["TYPE"].split() != ["F"] * len(fields):
        raise ParseError(f"only float fields supported, got TYPE {header['TYPE']}", f"{path}:TYPE")
    try:
        n_points = int(header["POINTS"])
    except ValueError:
        raise ParseError(f"bad POINTS value {header['POINTS']!r}", f"{path}:POINTS") from None

    ncol = len(fields)
    mode = header["DATA"]
    if mode == "ascii":
        try:
            tokens = raw[offset:].split()
            # Values were written as float32; parse at that precision so the
            # ascii and binary encodings of a cloud agree exactly.
            data = np.array(tokens, dtype=np.float32).astype(np.float64) if tokens else np.empty(0)
        except ValueError:
            raise ParseError("bad ascii data section", f"{path}:byte {offset}") from None
        if data.size != n_points * ncol:
            raise ParseError(
                f"expected {n_points * ncol} values, found {data.size}", f"{path}:byte {offset}"
            )
        data = data.reshape(n_points, ncol)
    elif mode == "binary":
        expected = n_points * ncol * 4
        payload = raw[offset:offset + expected]
        if len(payload) < expected:
            raise ParseError(
                f"binary payload truncated: {len(payload)} of {expected} bytes",
                f"{path}:byte {offset}",
            )
        data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(n_points, ncol)
    else:
        raise ParseError(f"unsupported DATA mode {mode!r}", f"{path}:DATA")

    keep = ~np.isnan(data).any(axis=1)
    dropped = int(len(data) - keep.sum())
    if dropped:
        logger.warning("dropped %d NaN rows from %s", dropped, path)
    data = data[keep]
    return PointCloud(
        data[:, :3],
        frame,
        timestamp=timestamp,
        intensity=data[:, 3] if ncol == 4 else None,
    )


def save_pcd(cloud: PointCloud, path: str | Path, binary: bool = True):
    """Write a cloud as PCD v0.7, float32 per field.

    Ascii output uses enough digits that ascii and binary encodings of the
    same cloud agree to float32 precision.
    """
    path = Path(path)
    has_intensity = cloud.intensity is not None
    fields = "x y z intensity" if has_intensity else "x y z"
    ncol = 4 if has_intensity else 3
    n = len(cloud)
    data = np.empty((n, ncol), dtype="<f4")
    data[:, :3] = cloud.points
    if has_intensity:
        data[:, 3] = cloud.intensity
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        f"FIELDS {fields}\n"
        f"SIZE {' '.join(['4'] * ncol)}\n"
        f"TYPE {' '.join(['F'] * ncol)}\n"
        f"COUNT {' '.join(['1'] * ncol)}\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
    )
    if binary:
        with open(path, "wb") as f:
            f.write(header.encode("ascii"))
            f.write(b"DATA binary\n")
            f.write(data.tobytes())
    else:
        with open(path, "w", encoding="ascii") as f:
            f.write(header)
            f.write("DATA ascii\n")
            for row in data:
                # Shortest decimal that uniquely identifies each float32.
                f.write(" ".join(np.format_float_positional(v, trim="0") for v in row))
                f.write("\n")
