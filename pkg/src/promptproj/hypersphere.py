"""Primitive operations on unit-hypersphere vectors.

Normalization, projection through a learned matrix, reconstruction, and
spherical distance. Dot products are clamped to [-1, 1] before arccos;
floating-point drift otherwise produces NaN at near-identical vectors.
All arithmetic is float64 regardless of file precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateDirectionError
from .store import EmbeddingSet

EPS_NORM = 1e-12

METHOD_TAGS = ("indirect", "pca", "random", "lae-encoder", "oracle")


@dataclass(frozen=True, eq=False)
class TransformMatrix:
    """A learned r x r' projection with provenance metadata."""

    values: np.ndarray
    method: str
    seed: int = 0
    loss_trace: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"transform must be 2-D, got shape {arr.shape}")
        if arr.shape[1] > arr.shape[0]:
            raise DataError(
                f"target dimension {arr.shape[1]} exceeds input dimension {arr.shape[0]}"
            )
        if not np.all(np.isfinite(arr)):
            raise DataError("transform contains non-finite values")
        if self.method not in METHOD_TAGS:
            raise DataError(f"unknown method tag {self.method!r}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if self.loss_trace is not None:
            object.__setattr__(
                self,
                "loss_trace",
                tuple((int(i), float(l)) for i, l in self.loss_trace),
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def __repr__(self) -> str:
        return (
            f"TransformMatrix({self.rows}x{self.cols}, method={self.method!r}, "
            f"seed={self.seed})"
        )


def _as_matrix(U) -> np.ndarray:
    if isinstance(U, TransformMatrix):
        return U.values
    return np.asarray(U, dtype=np.float64)


def normalize(v) -> np.ndarray:
    """v / ||v||; rejects near-zero vectors (no direction to preserve)."""
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm <= EPS_NORM:
        raise DegenerateDirectionError(f"cannot normalize vector with norm {norm:g}")
    return arr / norm


def project(v, U) -> np.ndarray:
    """Map a unit vector into the r'-dimensional sphere: normalize(v U)."""
    mat = _as_matrix(U)
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (mat.shape[0],):
        raise DataError(f"vector of dim {arr.shape} does not match {mat.shape[0]} rows")
    out = arr @ mat
    norm = float(np.linalg.norm(out))
    if norm <= EPS_NORM:
        raise DegenerateDirectionError(
            "projection is degenerate: input lies in the kernel of the transform"
        )
    return out / norm


def reconstruct(t_prime, U) -> np.ndarray:
    """Map an r'-dimensional unit vector back: normalize(t' U^T)."""
    mat = _as_matrix(U)
    arr = np.asarray(t_prime, dtype=np.float64)
    if arr.shape != (mat.shape[1],):
        raise DataError(f"vector of dim {arr.shape} does not match {mat.shape[1]} cols")
    out = arr @ mat.T
    norm = float(np.linalg.norm(out))
    if norm <= EPS_NORM:
        raise DegenerateDirectionError("reconstruction is degenerate")
    return out / norm


def spherical_distance(a, b) -> float:
    """Arc length between two unit vectors: arccos of the clamped dot."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DataError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return float(np.arccos(np.clip(va @ vb, -1.0, 1.0)))


def cosine_similarity(a, b) -> float:
    """(a.b)/(||a|| ||b||), clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DataError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= EPS_NORM or nb <= EPS_NORM:
        raise DegenerateDirectionError("cosine similarity of a zero-norm vector")
    return float(np.clip((va @ vb) / (na * nb), -1.0, 1.0))


def normalized_rows(eset: EmbeddingSet) -> np.ndarray:
    """Float64 unit-norm rows of an embedding set; names degenerate rows."""
    rows = eset.rows64()
    norms = np.linalg.norm(rows, axis=1)
    bad = np.flatnonzero(norms <= EPS_NORM)
    if bad.size:
        raise DegenerateDirectionError(
            f"row {eset.row_name(int(bad[0]))} has norm {norms[bad[0]]:g}"
        )
    return rows / norms[:, None]


def transform_images(V: EmbeddingSet, U) -> EmbeddingSet:
    """Apply the learned projection to every row: project(normalize(v_i), U)."""
    mat = _as_matrix(U)
    if V.dim != mat.shape[0]:
        raise DataError(
            f"embedding dim {V.dim} does not match transform rows {mat.shape[0]}"
        )
    rows = normalized_rows(V)
    out = rows @ mat
    norms = np.linalg.norm(out, axis=1)
    bad = np.flatnonzero(norms <= EPS_NORM)
    if bad.size:
        raise DegenerateDirectionError(
            f"row {V.row_name(int(bad[0]))} projects into the kernel of the transform"
        )
    return EmbeddingSet(out / norms[:, None], ids=V.ids)
