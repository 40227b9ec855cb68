"""Upper-bound trainer: fits the projection directly on labeled image
embeddings with a normalized softmax over unit-norm class prototypes.

This deliberately breaks the text-only constraint of the main method; it
estimates the best retrieval quality the linear transform could reach
given perfect label information. Prototypes are kept unit-norm by
renormalizing after every optimizer step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .hypersphere import TransformMatrix, _as_matrix, normalized_rows
from .indirect import FitResult
from .optim import MAX_ITERATIONS, minimize
from .rng import make_rng
from .store import EmbeddingSet, LabelSet


@dataclass(frozen=True, eq=False)
class ClassPrototypes:
    """One unit-norm prototype vector per class."""

    classes: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(self.classes):
            raise DataError(
                f"expected {len(self.classes)} prototype rows, got shape {arr.shape}"
            )
        if len(set(self.classes)) != len(self.classes):
            raise DataError("duplicate class labels")
        norms = np.linalg.norm(arr, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise DataError(
                f"prototype for {self.classes[worst]!r} has norm {norms[worst]:.12f}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "vectors", arr)
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _class_indices(labels: list[str], classes: tuple[str, ...]) -> np.ndarray:
    index = {c: j for j, c in enumerate(classes)}
    out = np.empty(len(labels), dtype=np.intp)
    for i, label in enumerate(labels):
        if label not in index:
            raise DataError(f"label {label!r} has no prototype")
        out[i] = index[label]
    return out


def _softmax_loss_grad(U, C, X, y):
    """Mean negative log-softmax plus gradients w.r.t. U and the prototypes."""
    m = X.shape[0]
    A = X @ U
    norm_a = np.linalg.norm(A, axis=1, keepdims=True)
    A_hat = A / norm_a
    logits = A_hat @ C.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1)
    log_prob = shifted[np.arange(m), y] - np.log(total)
    loss = float(-np.mean(log_prob))

    d_logits = exp / total[:, None]
    d_logits[np.arange(m), y] -= 1.0
    d_logits /= m
    g_c = d_logits.T @ A_hat
    d_a_hat = d_logits @ C
    d_a = (d_a_hat - np.einsum("ij,ij->i", d_a_hat, A_hat)[:, None] * A_hat) / norm_a
    g_u = X.T @ d_a
    return loss, g_u, g_c


def oracle_loss(
    U,
    prototypes: ClassPrototypes,
    V: EmbeddingSet,
    labels: LabelSet,
) -> float:
    """L = mean_i -log softmax(v'_i . c_{label_i}) over the class prototypes."""
    mat = _as_matrix(U)
    if V.dim != mat.shape[0]:
        raise ConfigError(f"embedding dim {V.dim} != transform rows {mat.shape[0]}")
    if prototypes.dim != mat.shape[1]:
        raise ConfigError(
            f"prototype dim {prototypes.dim} != transform cols {mat.shape[1]}"
        )
    aligned = labels.aligned_to(V)
    if set(aligned) != set(prototypes.classes):
        raise DataError("label set does not match the prototype class set")
    y = _class_indices(aligned, prototypes.classes)
    X = normalized_rows(V)
    loss, _, _ = _softmax_loss_grad(mat, prototypes.vectors, X, y)
    return loss


def fit_oracle(
    V: EmbeddingSet,
    labels: LabelSet,
    target_dim: int,
    seed: int,
    lr: float = 0.01,
    patience: int = 100,
    max_iterations: int = MAX_ITERATIONS,
) -> tuple[TransformMatrix, ClassPrototypes, FitResult]:
    """Jointly optimize the transform and the prototypes on labeled data."""
    if V.count < 2:
        raise ConfigError(f"need at least 2 items, got {V.count}")
    if not 1 <= target_dim <= V.dim:
        raise ConfigError(f"target_dim {target_dim} out of range for dim {V.dim}")
    aligned = labels.aligned_to(V)
    classes = tuple(sorted(set(aligned)))
    y = _class_indices(aligned, classes)
    X = normalized_rows(V)

    rng = make_rng(seed)
    u0 = rng.normal(0.0, 0.1, size=(V.dim, target_dim))
    c0 = rng.normal(size=(len(classes), target_dim))
    c0 /= np.linalg.norm(c0, axis=1, keepdims=True)

    def objective(params):
        loss, g_u, g_c = _softmax_loss_grad(params["u"], params["c"], X, y)
        return loss, {"u": g_u, "c": g_c}

    def renormalize(params):
        c = params["c"]
        params["c"] = c / np.linalg.norm(c, axis=1, keepdims=True)
        return params

    result = minimize(
        {"u": u0, "c": c0},
        objective,
        lr=lr,
        patience=patience,
        max_iterations=max_iterations,
        postprocess=renormalize,
    )
    transform = TransformMatrix(
        values=result.params["u"], method="oracle", seed=seed, loss_trace=result.trace
    )
    prototypes = ClassPrototypes(classes=classes, vectors=result.params["c"])
    fit = FitResult(
        transform=transform,
        final_loss=result.best_loss,
        iterations=result.iterations,
        loss_trace=result.trace,
    )
    return transform, prototypes, fit
