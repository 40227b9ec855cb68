"""Frozen vision-language encoders.

The transformers-backed encoder wraps a pretrained dual encoder in eval
mode under no_grad; weights are never updated. Model and preprocessing
objects can be injected, which keeps the extraction pipeline testable
without downloaded weights.
"""

from __future__ import annotations

from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

SUPPORTED_MODELS = {
    "ViT-B/32": ("openai/clip-vit-base-patch32", 512),
    "ViT-B/16": ("openai/clip-vit-base-patch16", 512),
    "ViT-L/14": ("openai/clip-vit-large-patch14", 768),
}


class ModelError(RuntimeError):
    pass


class Encoder(Protocol):
    dim: int

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...

    def encode_images(self, images: Sequence) -> np.ndarray: ...


def expected_dim(model_name: str) -> int:
    if model_name not in SUPPORTED_MODELS:
        raise ModelError(
            f"unsupported model {model_name!r}; choose from "
            f"{sorted(SUPPORTED_MODELS)}"
        )
    return SUPPORTED_MODELS[model_name][1]


class ClipEncoder:
    """Dual encoder backed by a transformers CLIP model."""

    def __init__(self, model, tokenizer=None, image_processor=None,
                 batch_size: int = 16):
        import torch

        self._torch = torch
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.image_processor = image_processor
        self.batch_size = max(1, int(batch_size))
        self.dim = int(model.config.projection_dim)

    @classmethod
    def from_name(cls, model_name: str, batch_size: int = 16) -> "ClipEncoder":
        """Load pretrained weights for one of the supported model names.

        Raises ModelError when the weights are not available (e.g. no
        network and no local cache).
        """
        expected_dim(model_name)
        hub_id, dim = SUPPORTED_MODELS[model_name]
        try:
            from transformers import CLIPImageProcessor, CLIPModel, CLIPTokenizer

            model = CLIPModel.from_pretrained(hub_id)
            tokenizer = CLIPTokenizer.from_pretrained(hub_id)
            image_processor = CLIPImageProcessor.from_pretrained(hub_id)
        except Exception as exc:
            raise ModelError(f"could not load {model_name} ({hub_id}): {exc}") from exc
        encoder = cls(model, tokenizer, image_processor, batch_size=batch_size)
        if encoder.dim != dim:
            raise ModelError(
                f"{model_name} produced dim {encoder.dim}, expected {dim}"
            )
        return encoder

    @staticmethod
    def _features(output) -> "np.ndarray":
        # transformers >= 5 returns a pooled model output, older versions a
        # plain tensor.
        tensor = getattr(output, "pooler_output", output)
        return tensor.cpu().numpy().astype(np.float64)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        if self.tokenizer is None:
            raise ModelError("encoder has no tokenizer; cannot embed texts")
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                batch = list(texts[start : start + self.batch_size])
                tokens = self.tokenizer(batch, padding=True, truncation=True,
                                        return_tensors="pt")
                chunks.append(self._features(self.model.get_text_features(**tokens)))
        return np.vstack(chunks)

    def encode_images(self, images: Sequence) -> np.ndarray:
        if self.image_processor is None:
            raise ModelError("encoder has no image processor; cannot embed images")
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                batch = list(images[start : start + self.batch_size])
                inputs = self.image_processor(images=batch, return_tensors="pt")
                chunks.append(self._features(self.model.get_image_features(**inputs)))
        return np.vstack(chunks)

    def weight_digest(self) -> str:
        """Hash of all parameters; extraction must leave it unchanged."""
        import hashlib

        digest = hashlib.sha256()
        for name, tensor in sorted(self.model.state_dict().items()):
            digest.update(name.encode())
            digest.update(tensor.cpu().numpy().tobytes())
        return digest.hexdigest()


def load_image(path: Path):
    from PIL import Image

    with Image.open(path) as img:
        return img.convert("RGB")
