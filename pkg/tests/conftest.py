import numpy as np
import pytest

from promptproj import EmbeddingSet, LabelSet
from promptproj.rng import make_rng


def unit_rows(n: int, dim: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    rows = rng.normal(size=(n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def subspace_rows(n: int, dim: int, k: int, seed: int) -> np.ndarray:
    """Unit rows confined to a random k-dimensional linear subspace."""
    rng = make_rng(seed)
    basis = np.linalg.qr(rng.normal(size=(dim, k)))[0]
    rows = rng.normal(size=(n, k)) @ basis.T
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def cluster_instance(n_per: int, n_classes: int, dim: int, seed: int,
                     spread: float = 0.05):
    """Well-separated unit clusters with labels; returns (EmbeddingSet, LabelSet)."""
    rng = make_rng(seed)
    centers = rng.normal(size=(n_classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows = []
    entries = []
    for c in range(n_classes):
        pts = centers[c] + spread * rng.normal(size=(n_per, dim))
        rows.append(pts)
        entries.extend((f"item{c}_{i}", f"class{c}") for i in range(n_per))
    rows = np.vstack(rows)
    ids = tuple(i for i, _ in entries)
    return EmbeddingSet(rows, ids=ids), LabelSet(tuple(entries))


@pytest.fixture
def rng():
    return make_rng(1234)
