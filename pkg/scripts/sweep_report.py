#!/usr/bin/env python3
"""Sweep the target dimension or the prompt-sample size and print the
mean and standard deviation of one metric per axis point.

Reproduces the embedding-size and prompt-count analyses on any data
directory holding text.emb, images.emb, labels.tsv.
"""

import argparse
from pathlib import Path

from promptproj.cli import ExperimentConfig, run_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--method", default="indirect")
    parser.add_argument("--axis", choices=("dim", "prompts"), default="dim")
    parser.add_argument("--values", default="2,4,8,16,32,64",
                        help="comma-separated axis values")
    parser.add_argument("--metric", default="map_at_r")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--dim", type=int, default=16,
                        help="target dimension for the prompt sweep")
    args = parser.parse_args()

    data = Path(args.data_dir)
    cfg = ExperimentConfig(
        method=args.method,
        img_emb=str(data / "images.emb"),
        labels=str(data / "labels.tsv"),
        text_emb=str(data / "text.emb"),
        dim=args.dim,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        metrics=(args.metric,),
    )
    values = [int(v) for v in args.values.split(",")]
    results = run_sweep(cfg, args.axis, values)

    print(f"\n{args.method}: {args.metric} by {args.axis}")
    print(f"{args.axis:>8}  {'mean':>8}  {'std':>8}")
    for value in values:
        point = results["points"][str(value)]
        if "error" in point:
            print(f"{value:>8}  inapplicable: {point['error']}")
        else:
            stat = point[args.metric]
            print(f"{value:>8}  {100 * stat['mean']:>7.1f}%  "
                  f"{100 * stat['std']:>7.1f}%")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
