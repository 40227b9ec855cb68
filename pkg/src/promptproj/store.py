"""Embedding file format and the shared in-memory data model.

File layout (bit-exact):
  bytes 0-3    magic b"EMB1"
  bytes 4-7    unsigned 32-bit little-endian header length H
  bytes 8..8+H UTF-8 JSON: {"count": m, "dim": r, "dtype": "f32",
               "ids": [...] or null}
  remainder    m*r little-endian IEEE-754 float32 values, row-major

Label files are two-column UTF-8 TSV (id, label) with no header row.
Prompt manifests are JSON objects {"template": ..., "aspects": [...]}.

Values are stored as float32 (extractor precision, half the file size);
every computation in the package upcasts to float64.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import DataError

MAGIC = b"EMB1"

_PLACEHOLDER = re.compile(r"\[[^\[\]]+\]")


class EmbeddingFormatError(DataError):
    """Malformed embedding file; ``offset`` names the offending byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """An immutable m x dim block of float32 row vectors with optional ids."""

    data: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"embedding data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DataError("embedding set must contain at least one row")
        if arr.shape[1] < 1:
            raise DataError("embedding dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != arr.shape[0]:
                raise DataError(
                    f"got {len(ids)} ids for {arr.shape[0]} rows"
                )
            if len(set(ids)) != len(ids):
                raise DataError("embedding ids must be unique")
            object.__setattr__(self, "ids", ids)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def rows64(self) -> np.ndarray:
        """Writable float64 copy of the data block for computation."""
        return self.data.astype(np.float64)

    def row_name(self, index: int) -> str:
        return self.ids[index] if self.ids is not None else f"#{index}"

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        tagged = "with ids" if self.ids is not None else "anonymous"
        return f"EmbeddingSet(count={self.count}, dim={self.dim}, {tagged})"


@dataclass(frozen=True)
class LabelSet:
    """Per-item categorical ground truth, used only for evaluation."""

    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        entries = tuple((str(i), str(l)) for i, l in self.entries)
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids):
            raise DataError("label ids must be unique")
        for i, label in entries:
            if not label:
                raise DataError(f"empty label for id {i!r}")
        object.__setattr__(self, "entries", entries)

    @property
    def count(self) -> int:
        return len(self.entries)

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)

    def aligned_to(self, embeddings: EmbeddingSet) -> list[str]:
        """Labels in the row order of ``embeddings``; id sets must match."""
        if embeddings.ids is None:
            raise DataError("embedding set has no ids to join labels on")
        table = self.as_dict()
        if set(table) != set(embeddings.ids):
            missing = sorted(set(embeddings.ids) - set(table))[:3]
            extra = sorted(set(table) - set(embeddings.ids))[:3]
            raise DataError(
                f"label ids do not match embedding ids "
                f"(missing e.g. {missing}, extra e.g. {extra})"
            )
        return [table[i] for i in embeddings.ids]


@dataclass(frozen=True)
class PromptManifest:
    """A template with one bracketed placeholder plus the aspect values."""

    template: str
    aspects: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "aspects", tuple(str(a) for a in self.aspects))
        n_holes = len(_PLACEHOLDER.findall(self.template))
        if n_holes != 1:
            raise DataError(
                f"template must contain exactly one [placeholder], "
                f"found {n_holes}: {self.template!r}"
            )
        if not self.aspects:
            raise DataError("aspect list must be non-empty")
        if len(set(self.aspects)) != len(self.aspects):
            raise DataError("aspects must be distinct")


def render_prompts(manifest: PromptManifest) -> list[str]:
    """One prompt per aspect, placeholder substituted verbatim."""
    return [_PLACEHOLDER.sub(lambda _: a, manifest.template) for a in manifest.aspects]


def _open_sink(destination) -> tuple[BinaryIO, bool]:
    if isinstance(destination, (str, Path)):
        return open(destination, "wb"), True
    return destination, False


def _open_source(source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "rb"), True
    return source, False


def write_embeddings(eset: EmbeddingSet, destination) -> int:
    """Write the binary format; returns the number of bytes written.

    Construction already guarantees finiteness, so no partial file can be
    produced by invalid values.
    """
    header = {
        "count": eset.count,
        "dim": eset.dim,
        "dtype": "f32",
        "ids": list(eset.ids) if eset.ids is not None else None,
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    payload = eset.data.astype("<f4", copy=False).tobytes(order="C")
    sink, close = _open_sink(destination)
    try:
        n = sink.write(MAGIC)
        n += sink.write(struct.pack("<I", len(header_bytes)))
        n += sink.write(header_bytes)
        n += sink.write(payload)
    finally:
        if close:
            sink.close()
    return n


def read_embeddings(source) -> "EmbeddingSet":
    """Parse the binary format back into an EmbeddingSet.

    Raises EmbeddingFormatError naming the byte offset for bad magic,
    truncation, header/payload size mismatch, and non-finite values.
    """
    src, close = _open_source(source)
    try:
        blob = src.read()
    finally:
        if close:
            src.close()

    if len(blob) < 4 or blob[:4] != MAGIC:
        raise EmbeddingFormatError(
            f"bad magic {blob[:4]!r}, expected {MAGIC!r}", offset=0
        )
    if len(blob) < 8:
        raise EmbeddingFormatError("truncated header length field", offset=4)
    (header_len,) = struct.unpack("<I", blob[4:8])
    header_end = 8 + header_len
    if len(blob) < header_end:
        raise EmbeddingFormatError(
            f"truncated header: need {header_len} bytes, have {len(blob) - 8}",
            offset=8,
        )
    try:
        header = json.loads(blob[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EmbeddingFormatError(f"unreadable header: {exc}", offset=8) from exc
    try:
        count = int(header["count"])
        dim = int(header["dim"])
        dtype = header["dtype"]
        ids = header["ids"]
    except (KeyError, TypeError, ValueError) as exc:
        raise EmbeddingFormatError(f"malformed header fields: {exc}", offset=8) from exc
    if dtype != "f32":
        raise EmbeddingFormatError(f"unsupported dtype {dtype!r}", offset=8)
    if count < 1 or dim < 1:
        raise EmbeddingFormatError(
            f"header declares count={count}, dim={dim}", offset=8
        )

    expected = count * dim * 4
    actual = len(blob) - header_end
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes"
        raise EmbeddingFormatError(
            f"{kind}: header declares {count}x{dim} f32 = {expected} bytes, "
            f"payload holds {actual}",
            offset=header_end,
        )
    values = np.frombuffer(blob[header_end:], dtype="<f4").reshape(count, dim)
    finite = np.isfinite(values)
    if not finite.all():
        flat = int(np.flatnonzero(~finite.ravel())[0])
        raise EmbeddingFormatError(
            f"non-finite value in row {flat // dim}",
            offset=header_end + 4 * flat,
        )
    try:
        return EmbeddingSet(values, ids=tuple(ids) if ids is not None else None)
    except DataError as exc:
        raise EmbeddingFormatError(str(exc), offset=8) from exc


def write_labels(labels: LabelSet, destination) -> None:
    """Two-column TSV, no header."""
    rows = []
    for item_id, label in labels.entries:
        for field in (item_id, label):
            if "\t" in field or "\n" in field or "\r" in field:
                raise DataError(f"label field contains tab/newline: {field!r}")
        rows.append(f"{item_id}\t{label}\n")
    if isinstance(destination, (str, Path)):
        Path(destination).write_text("".join(rows), encoding="utf-8")
    else:
        destination.write("".join(rows))


def read_labels(source) -> LabelSet:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(
                f"label line {lineno} has {len(parts)} fields, expected 2: {line!r}"
            )
        entries.append((parts[0], parts[1]))
    if not entries:
        raise DataError("label file is empty")
    return LabelSet(tuple(entries))


def write_manifest(manifest: PromptManifest, destination) -> None:
    doc = {"template": manifest.template, "aspects": list(manifest.aspects)}
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)


def read_manifest(source) -> PromptManifest:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        doc = json.loads(text)
        template = doc["template"]
        aspects = doc["aspects"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"malformed prompt manifest: {exc}") from exc
    return PromptManifest(template=template, aspects=tuple(aspects))
