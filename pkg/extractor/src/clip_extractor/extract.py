"""Extraction pipelines: prompt manifests and image directories to
embedding files in the shared format.

Embeddings are written raw (not normalized); normalization is the
retrieval package's responsibility so there is one source of truth.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .embfile import write_embedding_file
from .encoder import Encoder, load_image
from .manifest import ManifestError, load_manifest, render

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".webp")


@dataclass(frozen=True)
class ExtractorConfig:
    model: str = "ViT-B/32"
    batch_size: int = 16


def embed_texts(encoder: Encoder, manifest_path, out_path) -> int:
    """Render the manifest and embed each prompt; prompt strings are ids."""
    template, aspects = load_manifest(manifest_path)
    prompts = render(template, aspects)
    features = encoder.encode_texts(prompts)
    return write_embedding_file(out_path, features, ids=prompts)


def embed_images(encoder: Encoder, directory, out_path) -> int:
    """One row per decodable image, ids are filenames in lexicographic order.

    Undecodable files are skipped with a warning and recorded in a sidecar
    manifest next to the output.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ManifestError(f"{directory} is not a directory")
    paths = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    if not paths:
        raise ManifestError(f"no images found in {directory}")

    images, names, skipped = [], [], []
    for path in paths:
        try:
            images.append(load_image(path))
            names.append(path.name)
        except Exception as exc:
            warnings.warn(f"skipping undecodable image {path.name}: {exc}",
                          stacklevel=2)
            skipped.append({"file": path.name, "reason": str(exc)})
    if not images:
        raise ManifestError(f"no decodable images in {directory}")

    features = encoder.encode_images(images)
    written = write_embedding_file(out_path, features, ids=names)
    sidecar = Path(str(out_path) + ".skipped.json")
    if skipped:
        sidecar.write_text(json.dumps(skipped, indent=2) + "\n", encoding="utf-8")
    elif sidecar.exists():
        sidecar.unlink()
    return written
