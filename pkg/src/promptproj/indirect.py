"""Trainer for the prompt-derived projection.

Fits an r x r' matrix U so that unit-normalized text embeddings survive
the round trip through the r'-dimensional sphere: each row is projected
with U, renormalized, reconstructed with U^T, renormalized again, and the
mean spherical distance between input and reconstruction is minimized.

The gradient is exact, derived by the chain rule through both
normalizations and arccos, using d(normalize(x))/dx = (I - xx^T/|x|^2)/|x|
and d(arccos u)/du = -1/sqrt(1-u^2). Rows whose reconstruction cosine is
within EPS_COS of +-1 sit at the arccos singularity and contribute zero
gradient; their clamped distance still counts in the loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDirectionError
from .hypersphere import EPS_NORM, TransformMatrix, _as_matrix, normalized_rows
from .optim import MAX_ITERATIONS, minimize
from .rng import make_rng
from .store import EmbeddingSet

EPS_COS = 1e-7


@dataclass(frozen=True)
class IndirectConfig:
    target_dim: int = 128
    lr: float = 0.01
    patience: int = 100
    seed: int = 0
    init_stddev: float = 0.1
    max_iterations: int = MAX_ITERATIONS

    def __post_init__(self):
        if self.target_dim < 1:
            raise ConfigError(f"target_dim must be >= 1, got {self.target_dim}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.init_stddev <= 0:
            raise ConfigError(f"init_stddev must be positive, got {self.init_stddev}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class FitResult:
    transform: TransformMatrix
    final_loss: float
    iterations: int
    loss_trace: tuple[tuple[int, float], ...] = field(repr=False)


def _forward(U: np.ndarray, X: np.ndarray):
    """Shared forward pass; X must hold unit-norm rows."""
    A = X @ U
    norm_a = np.linalg.norm(A, axis=1, keepdims=True)
    bad = np.flatnonzero(norm_a.ravel() <= EPS_NORM)
    if bad.size:
        raise DegenerateDirectionError(
            f"row {int(bad[0])} projects into the kernel of U"
        )
    A_hat = A / norm_a
    B = A_hat @ U.T
    norm_b = np.linalg.norm(B, axis=1, keepdims=True)
    bad = np.flatnonzero(norm_b.ravel() <= EPS_NORM)
    if bad.size:
        raise DegenerateDirectionError(
            f"row {int(bad[0])} reconstructs to a zero vector"
        )
    B_hat = B / norm_b
    cos = np.einsum("ij,ij->i", X, B_hat)
    return A_hat, norm_a, B_hat, norm_b, cos


def _loss_from_cos(cos: np.ndarray) -> float:
    return float(np.mean(np.arccos(np.clip(cos, -1.0, 1.0))))


def indirect_loss(U, T: EmbeddingSet) -> float:
    """Mean spherical distance between rows of T and their reconstructions."""
    mat = _as_matrix(U)
    if T.dim != mat.shape[0]:
        raise ConfigError(f"embedding dim {T.dim} != transform rows {mat.shape[0]}")
    X = normalized_rows(T)
    *_, cos = _forward(mat, X)
    return _loss_from_cos(cos)


def indirect_loss_gradient(U, T: EmbeddingSet) -> np.ndarray:
    """Exact dL/dU for the mean spherical reconstruction distance."""
    mat = _as_matrix(U)
    if T.dim != mat.shape[0]:
        raise ConfigError(f"embedding dim {T.dim} != transform rows {mat.shape[0]}")
    X = normalized_rows(T)
    _, grad = _loss_and_grad(mat, X)
    return grad


def _loss_and_grad(U: np.ndarray, X: np.ndarray) -> tuple[float, np.ndarray]:
    n = X.shape[0]
    A_hat, norm_a, B_hat, norm_b, cos = _forward(U, X)
    loss = _loss_from_cos(cos)

    # Rows inside the arccos guard are frozen: zero gradient contribution.
    active = np.abs(cos) < 1.0 - EPS_COS
    dl_dcos = np.zeros_like(cos)
    dl_dcos[active] = -1.0 / (n * np.sqrt(1.0 - cos[active] ** 2))

    # cos_i = x_i . b_hat_i with b_hat = normalize(a_hat U^T):
    # backprop through the second normalization,
    g_b = dl_dcos[:, None] * (X - cos[:, None] * B_hat) / norm_b
    # then split between the U^T factor and the a_hat input,
    grad = g_b.T @ A_hat
    g_a_hat = g_b @ U
    # and through the first normalization to the U factor.
    g_a = (g_a_hat - np.einsum("ij,ij->i", g_a_hat, A_hat)[:, None] * A_hat) / norm_a
    grad += X.T @ g_a
    return loss, grad


def fit_indirect(T: EmbeddingSet, config: IndirectConfig = IndirectConfig()) -> FitResult:
    """Fit U from seeded N(0, init_stddev^2) with Adam and early stopping.

    Returns the parameters achieving the best observed loss.
    """
    if config.target_dim > T.dim:
        raise ConfigError(
            f"target_dim {config.target_dim} exceeds embedding dim {T.dim}"
        )
    X = normalized_rows(T)
    rng = make_rng(config.seed)
    u0 = rng.normal(0.0, config.init_stddev, size=(T.dim, config.target_dim))

    def objective(params):
        loss, grad = _loss_and_grad(params["u"], X)
        return loss, {"u": grad}

    result = minimize(
        {"u": u0},
        objective,
        lr=config.lr,
        patience=config.patience,
        max_iterations=config.max_iterations,
    )
    transform = TransformMatrix(
        values=result.params["u"],
        method="indirect",
        seed=config.seed,
        loss_trace=result.trace,
    )
    return FitResult(
        transform=transform,
        final_loss=result.best_loss,
        iterations=result.iterations,
        loss_trace=result.trace,
    )
