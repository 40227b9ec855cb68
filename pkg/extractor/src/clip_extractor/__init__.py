"""Thin adapter turning prompt manifests and image directories into
embedding files consumed by the retrieval package."""

from .embfile import EmbeddingWriteError, write_embedding_file
from .encoder import SUPPORTED_MODELS, ClipEncoder, ModelError, expected_dim
from .extract import ExtractorConfig, embed_images, embed_texts
from .manifest import ManifestError, load_manifest, render

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "EmbeddingWriteError",
    "ExtractorConfig",
    "ManifestError",
    "ModelError",
    "SUPPORTED_MODELS",
    "embed_images",
    "embed_texts",
    "expected_dim",
    "load_manifest",
    "render",
    "write_embedding_file",
]
