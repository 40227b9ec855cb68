"""Writer for the shared embedding file format.

Layout: magic "EMB1", little-endian uint32 header length, UTF-8 JSON
header {"count", "dim", "dtype": "f32", "ids"}, then count*dim
little-endian float32 values row-major. This is the interchange contract
with the retrieval package; its reader is the reference consumer.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"EMB1"


class EmbeddingWriteError(ValueError):
    pass


def write_embedding_file(path, values: np.ndarray, ids=None) -> int:
    """Write rows to ``path``; returns bytes written."""
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise EmbeddingWriteError(f"need a non-empty 2-D block, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingWriteError("refusing to write non-finite values")
    if ids is not None:
        ids = [str(i) for i in ids]
        if len(ids) != arr.shape[0]:
            raise EmbeddingWriteError(
                f"{len(ids)} ids for {arr.shape[0]} rows"
            )
        if len(set(ids)) != len(ids):
            raise EmbeddingWriteError("ids must be unique")

    header = {
        "count": int(arr.shape[0]),
        "dim": int(arr.shape[1]),
        "dtype": "f32",
        "ids": ids,
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    blob = (
        MAGIC
        + struct.pack("<I", len(header_bytes))
        + header_bytes
        + arr.astype("<f4", copy=False).tobytes(order="C")
    )
    Path(path).write_bytes(blob)
    return len(blob)
