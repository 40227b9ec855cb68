"""Command line interface: `extract texts|images`."""

from __future__ import annotations

import argparse
import sys

from .embfile import EmbeddingWriteError
from .encoder import ClipEncoder, ModelError, expected_dim
from .extract import embed_images, embed_texts
from .manifest import ManifestError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Embed prompt manifests or image directories with a "
        "frozen vision-language encoder.",
    )
    parser.add_argument("--model", default="ViT-B/32",
                        help="ViT-B/32, ViT-B/16, or ViT-L/14")
    parser.add_argument("--batch-size", type=int, default=16)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("texts", help="embed rendered prompts from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("images", help="embed every image in a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        expected_dim(args.model)
        encoder = ClipEncoder.from_name(args.model, batch_size=args.batch_size)
        if args.command == "texts":
            written = embed_texts(encoder, args.manifest, args.out)
        else:
            written = embed_images(encoder, args.dir, args.out)
    except (ManifestError, EmbeddingWriteError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {written} bytes to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
