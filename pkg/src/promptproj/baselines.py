"""Alternative embedding producers: PCA, linear and nonlinear autoencoders,
random transforms, and uniform random unit embeddings.

PCA operates on the unit-normalized rows (the raw variant is behind a
flag) and centers them before the SVD; text embeddings share a large mean
direction, so centering matters. The autoencoders minimize the summed
squared reconstruction error with the same Adam + early stopping as the
main trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .hypersphere import TransformMatrix, normalized_rows
from .optim import MAX_ITERATIONS, minimize
from .rng import make_rng
from .store import EmbeddingSet

AE_HIDDEN = 512
AE_LEAKY_SLOPE = 0.01
AE_WEIGHT_DECAY = 1e-2


def fit_pca(
    T: EmbeddingSet,
    target_dim: int,
    center: bool = True,
    normalize: bool = True,
) -> TransformMatrix:
    """Top-``target_dim`` principal directions of the (normalized) rows.

    Computed via thin SVD of the centered row matrix for conditioning at
    small n. Columns are orthonormal, ordered by descending explained
    variance, and sign-fixed so each column's largest-magnitude entry is
    positive. Applicable only when target_dim < number of rows.
    """
    if target_dim < 1:
        raise ConfigError(f"target_dim must be >= 1, got {target_dim}")
    if target_dim >= T.count:
        raise ConfigError(
            f"PCA needs more data points than components: "
            f"target_dim {target_dim} >= count {T.count}"
        )
    X = normalized_rows(T) if normalize else T.rows64()
    if center:
        X = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    # Rank below the float32 carrier's noise floor is not distinguishable.
    tol = s[0] * max(X.shape) * np.finfo(np.float32).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank < target_dim:
        raise DataError(
            f"data rank {rank} is below the requested {target_dim} components"
        )
    components = vt[:target_dim].T.copy()
    # Sign convention: flip columns whose largest-magnitude entry is negative.
    peaks = np.argmax(np.abs(components), axis=0)
    flip = components[peaks, np.arange(target_dim)] < 0
    components[:, flip] *= -1.0
    return TransformMatrix(values=components, method="pca", seed=0)


def pca_explained_variance(T: EmbeddingSet, U: TransformMatrix,
                           center: bool = True, normalize: bool = True) -> np.ndarray:
    """Per-component variance of the data projected on U's columns."""
    X = normalized_rows(T) if normalize else T.rows64()
    if center:
        X = X - X.mean(axis=0)
    proj = X @ U.values
    return proj.var(axis=0)


@dataclass(frozen=True)
class LaeParams:
    """Affine encoder/decoder pair: encode = x W1 + b1, decode = h W2 + b2."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        r, rp = self.w1.shape
        if self.w2.shape != (rp, r) or self.b1.shape != (rp,) or self.b2.shape != (r,):
            raise DataError("inconsistent LAE parameter shapes")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise DataError("non-finite LAE parameter")


def _lae_objective(X: np.ndarray):
    def loss_and_grad(params):
        hidden = X @ params["w1"] + params["b1"]
        recon = hidden @ params["w2"] + params["b2"]
        err = X - recon
        loss = float(np.sum(err * err))
        d_recon = -2.0 * err
        d_hidden = d_recon @ params["w2"].T
        grads = {
            "w1": X.T @ d_hidden,
            "b1": d_hidden.sum(axis=0),
            "w2": hidden.T @ d_recon,
            "b2": d_recon.sum(axis=0),
        }
        return loss, grads

    return loss_and_grad


def fit_lae(
    T: EmbeddingSet,
    target_dim: int,
    seed: int,
    lr: float = 0.01,
    patience: int = 100,
    max_iterations: int = MAX_ITERATIONS,
) -> LaeParams:
    """Minimize the summed squared reconstruction error of an affine map."""
    if T.count < 2:
        raise ConfigError(f"need at least 2 rows, got {T.count}")
    if not 1 <= target_dim <= T.dim:
        raise ConfigError(f"target_dim {target_dim} out of range for dim {T.dim}")
    X = normalized_rows(T)
    rng = make_rng(seed)
    params = {
        "w1": rng.normal(0.0, 0.1, size=(T.dim, target_dim)),
        "b1": np.zeros(target_dim),
        "w2": rng.normal(0.0, 0.1, size=(target_dim, T.dim)),
        "b2": np.zeros(T.dim),
    }
    result = minimize(params, _lae_objective(X), lr=lr, patience=patience,
                      max_iterations=max_iterations)
    return LaeParams(**result.params)


def transform_lae(V: EmbeddingSet, params: LaeParams) -> EmbeddingSet:
    """Normalize each row, then apply the affine encoder. No renormalization."""
    if V.dim != params.w1.shape[0]:
        raise DataError(
            f"embedding dim {V.dim} does not match encoder input {params.w1.shape[0]}"
        )
    X = normalized_rows(V)
    return EmbeddingSet(X @ params.w1 + params.b1, ids=V.ids)


@dataclass(frozen=True)
class AeParams:
    """Two affine layers per side with one leaky-ReLU between them."""

    enc_w1: np.ndarray
    enc_b1: np.ndarray
    enc_w2: np.ndarray
    enc_b2: np.ndarray
    dec_w1: np.ndarray
    dec_b1: np.ndarray
    dec_w2: np.ndarray
    dec_b2: np.ndarray
    hidden: int = AE_HIDDEN
    slope: float = AE_LEAKY_SLOPE

    def __post_init__(self):
        r, h = self.enc_w1.shape
        rp = self.enc_w2.shape[1]
        ok = (
            self.enc_w2.shape == (h, rp)
            and self.dec_w1.shape == (rp, h)
            and self.dec_w2.shape == (h, r)
            and self.enc_b1.shape == (h,)
            and self.enc_b2.shape == (rp,)
            and self.dec_b1.shape == (h,)
            and self.dec_b2.shape == (r,)
            and h == self.hidden
        )
        if not ok:
            raise DataError("inconsistent AE parameter shapes")


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def _leaky_grad(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, 1.0, slope)


def _ae_objective(X: np.ndarray, slope: float, weight_decay: float):
    weight_keys = ("enc_w1", "enc_w2", "dec_w1", "dec_w2")

    def loss_and_grad(params):
        z1 = X @ params["enc_w1"] + params["enc_b1"]
        a1 = _leaky(z1, slope)
        code = a1 @ params["enc_w2"] + params["enc_b2"]
        z2 = code @ params["dec_w1"] + params["dec_b1"]
        a2 = _leaky(z2, slope)
        recon = a2 @ params["dec_w2"] + params["dec_b2"]

        err = X - recon
        loss = float(np.sum(err * err))
        if weight_decay:
            loss += weight_decay * sum(
                float(np.sum(params[k] ** 2)) for k in weight_keys
            )

        d_recon = -2.0 * err
        grads = {
            "dec_w2": a2.T @ d_recon,
            "dec_b2": d_recon.sum(axis=0),
        }
        d_a2 = d_recon @ params["dec_w2"].T
        d_z2 = d_a2 * _leaky_grad(z2, slope)
        grads["dec_w1"] = code.T @ d_z2
        grads["dec_b1"] = d_z2.sum(axis=0)
        d_code = d_z2 @ params["dec_w1"].T
        grads["enc_w2"] = a1.T @ d_code
        grads["enc_b2"] = d_code.sum(axis=0)
        d_a1 = d_code @ params["enc_w2"].T
        d_z1 = d_a1 * _leaky_grad(z1, slope)
        grads["enc_w1"] = X.T @ d_z1
        grads["enc_b1"] = d_z1.sum(axis=0)
        if weight_decay:
            for k in weight_keys:
                grads[k] = grads[k] + 2.0 * weight_decay * params[k]
        return loss, grads

    return loss_and_grad


def fit_ae(
    T: EmbeddingSet,
    target_dim: int,
    seed: int,
    lr: float = 0.01,
    patience: int = 100,
    weight_decay: float = AE_WEIGHT_DECAY,
    max_iterations: int = MAX_ITERATIONS,
) -> AeParams:
    """Nonlinear autoencoder: reconstruction SSE plus L2 on weight matrices.

    Biases are exempt from the decay term, the conventional reading.
    """
    if T.count < 2:
        raise ConfigError(f"need at least 2 rows, got {T.count}")
    if not 1 <= target_dim <= T.dim:
        raise ConfigError(f"target_dim {target_dim} out of range for dim {T.dim}")
    X = normalized_rows(T)
    rng = make_rng(seed)
    params = {
        "enc_w1": rng.normal(0.0, 0.1, size=(T.dim, AE_HIDDEN)),
        "enc_b1": np.zeros(AE_HIDDEN),
        "enc_w2": rng.normal(0.0, 0.1, size=(AE_HIDDEN, target_dim)),
        "enc_b2": np.zeros(target_dim),
        "dec_w1": rng.normal(0.0, 0.1, size=(target_dim, AE_HIDDEN)),
        "dec_b1": np.zeros(AE_HIDDEN),
        "dec_w2": rng.normal(0.0, 0.1, size=(AE_HIDDEN, T.dim)),
        "dec_b2": np.zeros(T.dim),
    }
    result = minimize(
        params,
        _ae_objective(X, AE_LEAKY_SLOPE, weight_decay),
        lr=lr,
        patience=patience,
        max_iterations=max_iterations,
    )
    return AeParams(**result.params)


def ae_reconstruction_error(T: EmbeddingSet, params: AeParams) -> float:
    """Summed squared reconstruction error, excluding the decay term."""
    X = normalized_rows(T)
    z1 = X @ params.enc_w1 + params.enc_b1
    code = _leaky(z1, params.slope) @ params.enc_w2 + params.enc_b2
    z2 = code @ params.dec_w1 + params.dec_b1
    recon = _leaky(z2, params.slope) @ params.dec_w2 + params.dec_b2
    err = X - recon
    return float(np.sum(err * err))


def transform_ae(V: EmbeddingSet, params: AeParams) -> EmbeddingSet:
    """Normalize each row, then apply the encoder. No renormalization."""
    if V.dim != params.enc_w1.shape[0]:
        raise DataError(
            f"embedding dim {V.dim} does not match encoder input "
            f"{params.enc_w1.shape[0]}"
        )
    X = normalized_rows(V)
    a1 = _leaky(X @ params.enc_w1 + params.enc_b1, params.slope)
    return EmbeddingSet(a1 @ params.enc_w2 + params.enc_b2, ids=V.ids)


def random_transform(dim: int, target_dim: int, seed: int) -> TransformMatrix:
    """A transform left at its N(0, 0.1^2) initialization."""
    if not 1 <= target_dim <= dim:
        raise ConfigError(f"target_dim {target_dim} out of range for dim {dim}")
    rng = make_rng(seed)
    values = rng.normal(0.0, 0.1, size=(dim, target_dim))
    return TransformMatrix(values=values, method="random", seed=seed)


def random_unit_embeddings(
    count: int, target_dim: int, seed: int, ids: tuple[str, ...] | None = None
) -> EmbeddingSet:
    """Rows drawn uniformly from the unit hypersphere (normalized Gaussians)."""
    if count < 1 or target_dim < 1:
        raise ConfigError(f"need count >= 1 and target_dim >= 1, got "
                          f"{count}, {target_dim}")
    rng = make_rng(seed)
    rows = rng.normal(size=(count, target_dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return EmbeddingSet(rows, ids=ids)
