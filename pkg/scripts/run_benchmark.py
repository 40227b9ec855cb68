#!/usr/bin/env python3
"""Run every method on one data directory and print a combined table.

Expects text.emb, images.emb, labels.tsv (see make_synthetic_data.py).
PCA is skipped automatically when the prompt count cannot support the
requested dimension.
"""

import argparse
from pathlib import Path

from promptproj import ConfigError, DataError, render_table
from promptproj.cli import METHODS, ExperimentConfig, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--metrics", default="map_at_r,prec_at_1,r_prec,map,mrr")
    parser.add_argument("--out-dir", help="also save one report JSON per method")
    args = parser.parse_args()

    data = Path(args.data_dir)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    metrics = tuple(args.metrics.split(","))

    columns = []
    for method in METHODS:
        cfg = ExperimentConfig(
            method=method,
            img_emb=str(data / "images.emb"),
            labels=str(data / "labels.tsv"),
            text_emb=str(data / "text.emb"),
            dim=args.dim,
            seeds=seeds,
            metrics=metrics,
        )
        try:
            report = run_experiment(cfg)
        except (ConfigError, DataError) as exc:
            print(f"skipping {method}: {exc}")
            continue
        columns.append((method, report))
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{method}.json").write_text(report.to_json())

    print()
    print(render_table(columns), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
