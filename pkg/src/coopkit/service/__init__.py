"""Annotation backend: HTTP API plus the on-disk label revision store."""

from coopkit.service.app import (
    BOX_EDGES,
    CHUNK_MAGIC,
    CHUNK_POINTS,
    create_app,
    decode_chunk,
    encode_chunk,
)
from coopkit.service.store import SequenceStore

__all__ = [
    "BOX_EDGES",
    "CHUNK_MAGIC",
    "CHUNK_POINTS",
    "SequenceStore",
    "create_app",
    "decode_chunk",
    "encode_chunk",
]
