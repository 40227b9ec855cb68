"""Similarity-notion-specific embedding projections learned from text prompts.

A handful of prompt embeddings train a linear map U that keeps the
directions in which the prompts vary; applying U to image embeddings
yields compact vectors ranked with cosine similarity. Ships with the full
baseline set (PCA, linear/nonlinear autoencoders, random transforms, a
label-supervised upper bound) and a retrieval metric suite.
"""

from .baselines import (
    AeParams,
    LaeParams,
    fit_ae,
    fit_lae,
    fit_pca,
    random_transform,
    random_unit_embeddings,
    transform_ae,
    transform_lae,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDirectionError,
    DivergenceError,
    Error,
    NumericalError,
)
from .hypersphere import (
    TransformMatrix,
    cosine_similarity,
    normalize,
    project,
    reconstruct,
    spherical_distance,
    transform_images,
)
from .indirect import (
    FitResult,
    IndirectConfig,
    fit_indirect,
    indirect_loss,
    indirect_loss_gradient,
)
from .metrics import (
    METRIC_NAMES,
    MetricStat,
    RankedRetrieval,
    RetrievalReport,
    ami,
    evaluate_embeddings,
    kmeans,
    map_at_r,
    mean_average_precision,
    mean_reciprocal_rank,
    nmi,
    per_query_ranking_metrics,
    precision_at_1,
    r_precision,
    rank_neighbors,
    render_table,
)
from .optim import AdamState, EarlyStopMonitor, adam_step, check_early_stop, minimize
from .oracle import ClassPrototypes, fit_oracle, oracle_loss
from .store import (
    EmbeddingSet,
    EmbeddingFormatError,
    LabelSet,
    PromptManifest,
    read_embeddings,
    read_labels,
    read_manifest,
    render_prompts,
    write_embeddings,
    write_labels,
    write_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AeParams",
    "ClassPrototypes",
    "ConfigError",
    "DataError",
    "DegenerateDirectionError",
    "DivergenceError",
    "EarlyStopMonitor",
    "EmbeddingFormatError",
    "EmbeddingSet",
    "Error",
    "FitResult",
    "IndirectConfig",
    "LabelSet",
    "LaeParams",
    "METRIC_NAMES",
    "MetricStat",
    "NumericalError",
    "PromptManifest",
    "RankedRetrieval",
    "RetrievalReport",
    "TransformMatrix",
    "adam_step",
    "ami",
    "check_early_stop",
    "cosine_similarity",
    "evaluate_embeddings",
    "fit_ae",
    "fit_indirect",
    "fit_lae",
    "fit_oracle",
    "fit_pca",
    "indirect_loss",
    "indirect_loss_gradient",
    "kmeans",
    "map_at_r",
    "mean_average_precision",
    "mean_reciprocal_rank",
    "minimize",
    "nmi",
    "normalize",
    "oracle_loss",
    "per_query_ranking_metrics",
    "precision_at_1",
    "project",
    "r_precision",
    "random_transform",
    "random_unit_embeddings",
    "rank_neighbors",
    "read_embeddings",
    "read_labels",
    "read_manifest",
    "reconstruct",
    "render_prompts",
    "render_table",
    "spherical_distance",
    "transform_ae",
    "transform_images",
    "transform_lae",
    "write_embeddings",
    "write_labels",
    "write_manifest",
]
