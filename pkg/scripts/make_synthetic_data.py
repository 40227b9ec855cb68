#!/usr/bin/env python3
"""Generate a synthetic benchmark instance.

Class structure lives in a low-dimensional subspace of the embedding
space; text prompts span that same subspace, so text-trained transforms
transfer to the images. Writes text.emb, images.emb, labels.tsv.
"""

import argparse
from pathlib import Path

import numpy as np

from promptproj import EmbeddingSet, LabelSet, write_embeddings, write_labels
from promptproj.rng import make_rng


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--rank", type=int, default=6,
                        help="dimension of the shared class/prompt subspace")
    parser.add_argument("--classes", type=int, default=8)
    parser.add_argument("--per-class", type=int, default=25)
    parser.add_argument("--prompts", type=int, default=60)
    parser.add_argument("--noise", type=float, default=0.08,
                        help="within-class spread")
    parser.add_argument("--ambient-noise", type=float, default=0.02,
                        help="off-subspace noise applied to every image")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = make_rng(args.seed)
    basis = np.linalg.qr(rng.normal(size=(args.dim, args.rank)))[0]

    centers = rng.normal(size=(args.classes, args.rank)) @ basis.T
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows, entries = [], []
    for c in range(args.classes):
        jitter = args.noise * rng.normal(size=(args.per_class, args.rank)) @ basis.T
        off_plane = args.ambient_noise * rng.normal(
            size=(args.per_class, args.dim)
        )
        rows.append(centers[c] + jitter + off_plane)
        entries.extend(
            (f"img_{c:02d}_{i:04d}", f"class_{c:02d}") for i in range(args.per_class)
        )
    images = EmbeddingSet(np.vstack(rows), ids=tuple(i for i, _ in entries))
    labels = LabelSet(tuple(entries))

    prompts = EmbeddingSet(
        rng.normal(size=(args.prompts, args.rank)) @ basis.T,
        ids=tuple(f"prompt_{i:03d}" for i in range(args.prompts)),
    )

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_embeddings(images, out / "images.emb")
    write_embeddings(prompts, out / "text.emb")
    write_labels(labels, out / "labels.tsv")
    print(f"wrote {images.count} images, {prompts.count} prompts, "
          f"{labels.count} labels to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
