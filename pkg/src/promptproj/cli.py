"""Experiment runner: fit transforms, apply them, evaluate retrieval
quality, sweep hyperparameters, and render report tables.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Relative input paths are also resolved against $PROMPTPROJ_DATA.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

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
from .errors import ConfigError, DataError, NumericalError
from .hypersphere import TransformMatrix, normalized_rows, transform_images
from .indirect import IndirectConfig, fit_indirect
from .metrics import (
    METRIC_NAMES,
    RetrievalReport,
    aggregate_runs,
    evaluate_embeddings,
    render_table,
)
from .oracle import fit_oracle
from .store import (
    EmbeddingSet,
    LabelSet,
    read_embeddings,
    read_labels,
    write_embeddings,
)

DATA_DIR_ENV = "PROMPTPROJ_DATA"

METHODS = (
    "indirect",
    "pca",
    "lae",
    "ae",
    "random-transform",
    "random-embedding",
    "clip-passthrough",
    "oracle",
)

_TEXT_METHODS = ("indirect", "pca", "lae", "ae")
_FIT_METHODS = ("indirect", "pca", "lae", "ae", "random-transform", "oracle")


def resolve_path(path: str) -> str:
    p = Path(path)
    if p.exists() or p.is_absolute():
        return str(p)
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return str(Path(base) / p)
    return str(p)


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    img_emb: str
    labels: str
    text_emb: str | None = None
    dim: int = 128
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    metrics: tuple[str, ...] = METRIC_NAMES
    lr: float = 0.01
    patience: int = 100

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method in _TEXT_METHODS and not self.text_emb:
            raise ConfigError(f"method {self.method!r} requires --text-emb")
        if not self.img_emb:
            raise ConfigError("--img-emb is required")
        if not self.labels:
            raise ConfigError("--labels is required (metrics need ground truth)")
        if self.dim < 1:
            raise ConfigError(f"--dim must be >= 1, got {self.dim}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise ConfigError(f"unknown metrics {unknown}; choose from {METRIC_NAMES}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "img_emb": self.img_emb,
            "labels": self.labels,
            "text_emb": self.text_emb,
            "dim": self.dim,
            "seeds": list(self.seeds),
            "metrics": list(self.metrics),
            "lr": self.lr,
            "patience": self.patience,
        }


def config_fingerprint(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def fit_method(
    method: str,
    seed: int,
    dim: int,
    text: EmbeddingSet | None,
    img: EmbeddingSet,
    labels: LabelSet | None,
    lr: float = 0.01,
    patience: int = 100,
):
    """Fit the transform object for one seed. Returns None for methods
    without a fitting step."""
    if method == "indirect":
        cfg = IndirectConfig(target_dim=dim, lr=lr, patience=patience, seed=seed)
        return fit_indirect(text, cfg).transform
    if method == "pca":
        return fit_pca(text, dim)
    if method == "lae":
        return fit_lae(text, dim, seed, lr=lr, patience=patience)
    if method == "ae":
        return fit_ae(text, dim, seed, lr=lr, patience=patience)
    if method == "random-transform":
        return random_transform(img.dim, dim, seed)
    if method == "oracle":
        transform, _, _ = fit_oracle(img, labels, dim, seed, lr=lr, patience=patience)
        return transform
    return None


def apply_method(
    method: str, transform, img: EmbeddingSet, seed: int, dim: int
) -> EmbeddingSet:
    """Produce the embeddings a method feeds to evaluation."""
    if method == "clip-passthrough":
        return EmbeddingSet(normalized_rows(img), ids=img.ids)
    if method == "random-embedding":
        return random_unit_embeddings(img.count, dim, seed, ids=img.ids)
    if isinstance(transform, LaeParams):
        return transform_lae(img, transform)
    if isinstance(transform, AeParams):
        return transform_ae(img, transform)
    if isinstance(transform, TransformMatrix):
        return transform_images(img, transform)
    raise ConfigError(f"method {method!r} produced no applicable transform")


def _load_inputs(cfg: ExperimentConfig):
    img = read_embeddings(resolve_path(cfg.img_emb))
    labels = read_labels(resolve_path(cfg.labels))
    labels.aligned_to(img)
    text = None
    if cfg.method in _TEXT_METHODS:
        text = read_embeddings(resolve_path(cfg.text_emb))
        if text.dim != img.dim:
            raise DataError(
                f"text embedding dim {text.dim} != image embedding dim {img.dim}"
            )
    return text, img, labels


def _run_seeds(cfg: ExperimentConfig, text, img, labels,
               text_for_seed=None) -> RetrievalReport:
    per_run = []
    skipped = 0
    for seed in cfg.seeds:
        try:
            seed_text = text_for_seed(seed) if text_for_seed is not None else text
            transform = fit_method(
                cfg.method, seed, cfg.dim, seed_text, img, labels,
                lr=cfg.lr, patience=cfg.patience,
            )
            produced = apply_method(cfg.method, transform, img, seed, cfg.dim)
            values, skipped = evaluate_embeddings(
                produced, labels, cfg.metrics, cluster_seed=seed
            )
        except (ConfigError, DataError, NumericalError) as exc:
            raise exc.__class__(f"seed {seed}: {exc}") from exc
        per_run.append(values)
    config = cfg.to_dict()
    return aggregate_runs(
        per_run,
        config=config,
        fingerprint=config_fingerprint(config),
        skipped_queries=skipped,
    )


def run_experiment(cfg: ExperimentConfig) -> RetrievalReport:
    """Fit (per seed where applicable), transform, evaluate, aggregate."""
    cfg.validate()
    text, img, labels = _load_inputs(cfg)
    return _run_seeds(cfg, text, img, labels)


def _subsample_text(text: EmbeddingSet, size: int, seed: int) -> EmbeddingSet:
    if not 1 <= size <= text.count:
        raise ConfigError(f"prompt sample size {size} out of range for "
                          f"{text.count} prompts")
    if size == text.count:
        return text
    from .rng import make_rng

    indices = np.sort(make_rng(seed).choice(text.count, size=size, replace=False))
    ids = tuple(text.ids[i] for i in indices) if text.ids is not None else None
    return EmbeddingSet(text.data[indices], ids=ids)


def run_sweep(cfg: ExperimentConfig, axis: str, values: list[int]) -> dict:
    """One experiment per axis value; per-point applicability errors are
    recorded in the output instead of aborting the sweep."""
    cfg.validate()
    if axis not in ("dim", "prompts"):
        raise ConfigError(f"unknown sweep axis {axis!r}; use 'dim' or 'prompts'")
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    if axis == "prompts" and cfg.method not in _TEXT_METHODS:
        raise ConfigError(f"prompt sweep requires a text-trained method, "
                          f"got {cfg.method!r}")
    text, img, labels = _load_inputs(cfg)
    results: dict[str, dict] = {}
    for value in values:
        try:
            if axis == "dim":
                point = replace(cfg, dim=int(value))
                report = _run_seeds(point, text, img, labels)
            else:
                report = _run_seeds(
                    cfg, text, img, labels,
                    text_for_seed=lambda seed, v=int(value): _subsample_text(
                        text, v, seed
                    ),
                )
            results[str(value)] = report.to_json_dict()
        except (ConfigError, DataError, NumericalError) as exc:
            results[str(value)] = {"error": str(exc)}
    return {"axis": axis, "method": cfg.method, "points": results}


def transform_to_doc(obj) -> dict:
    if isinstance(obj, TransformMatrix):
        return {
            "kind": "matrix",
            "method": obj.method,
            "seed": obj.seed,
            "values": obj.values.tolist(),
            "loss_trace": [list(e) for e in obj.loss_trace]
            if obj.loss_trace is not None
            else None,
        }
    if isinstance(obj, LaeParams):
        return {
            "kind": "lae",
            "w1": obj.w1.tolist(),
            "b1": obj.b1.tolist(),
            "w2": obj.w2.tolist(),
            "b2": obj.b2.tolist(),
        }
    if isinstance(obj, AeParams):
        return {
            "kind": "ae",
            "hidden": obj.hidden,
            "slope": obj.slope,
            **{
                name: getattr(obj, name).tolist()
                for name in (
                    "enc_w1", "enc_b1", "enc_w2", "enc_b2",
                    "dec_w1", "dec_b1", "dec_w2", "dec_b2",
                )
            },
        }
    raise ConfigError(f"cannot serialize transform of type {type(obj).__name__}")


def transform_from_doc(doc: dict):
    try:
        kind = doc["kind"]
        if kind == "matrix":
            return TransformMatrix(
                values=np.asarray(doc["values"], dtype=np.float64),
                method=doc["method"],
                seed=int(doc["seed"]),
                loss_trace=tuple((int(i), float(l)) for i, l in doc["loss_trace"])
                if doc.get("loss_trace") is not None
                else None,
            )
        if kind == "lae":
            return LaeParams(
                w1=np.asarray(doc["w1"], dtype=np.float64),
                b1=np.asarray(doc["b1"], dtype=np.float64),
                w2=np.asarray(doc["w2"], dtype=np.float64),
                b2=np.asarray(doc["b2"], dtype=np.float64),
            )
        if kind == "ae":
            arrays = {
                name: np.asarray(doc[name], dtype=np.float64)
                for name in (
                    "enc_w1", "enc_b1", "enc_w2", "enc_b2",
                    "dec_w1", "dec_b1", "dec_w2", "dec_b2",
                )
            }
            return AeParams(hidden=int(doc["hidden"]), slope=float(doc["slope"]),
                            **arrays)
    except KeyError as exc:
        raise DataError(f"transform file is missing field {exc}") from exc
    raise DataError(f"unknown transform kind {doc.get('kind')!r}")


def save_transform(obj, path: str) -> None:
    Path(path).write_text(json.dumps(transform_to_doc(obj)) + "\n", encoding="utf-8")


def load_transform(path: str):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable transform file {path}: {exc}") from exc
    return transform_from_doc(doc)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_metrics(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.split(",") if x)


def _config_from_args(args) -> ExperimentConfig:
    base: dict = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(resolve_path(args.config)).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"unreadable config file: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "method": getattr(args, "method", None),
        "text_emb": getattr(args, "text_emb", None),
        "img_emb": getattr(args, "img_emb", None),
        "labels": getattr(args, "labels", None),
        "dim": getattr(args, "dim", None),
        "seeds": _parse_int_list(args.seeds) if getattr(args, "seeds", None) else None,
        "metrics": _parse_metrics(args.metrics)
        if getattr(args, "metrics", None)
        else None,
        "lr": getattr(args, "lr", None),
        "patience": getattr(args, "patience", None),
    }
    merged = dict(base)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        if "seeds" in merged:
            merged["seeds"] = tuple(int(s) for s in merged["seeds"])
        if "metrics" in merged:
            merged["metrics"] = tuple(merged["metrics"])
        for key, cast in (("dim", int), ("patience", int), ("lr", float)):
            if key in merged:
                merged[key] = cast(merged[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "method" not in merged:
        raise ConfigError("--method is required")
    if "img_emb" not in merged:
        raise ConfigError("--img-emb is required")
    if "labels" not in merged:
        raise ConfigError("--labels is required")
    return ExperimentConfig(**merged)


def _cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    if cfg.method not in _FIT_METHODS:
        raise ConfigError(f"method {cfg.method!r} has nothing to fit")
    text, img, labels = _load_inputs(cfg)
    transform = fit_method(
        cfg.method, cfg.seeds[0], cfg.dim, text, img, labels,
        lr=cfg.lr, patience=cfg.patience,
    )
    save_transform(transform, args.out)
    print(f"wrote transform to {args.out}")
    return 0


def _cmd_transform(args) -> int:
    transform = load_transform(resolve_path(args.transform))
    img = read_embeddings(resolve_path(args.img_emb))
    if isinstance(transform, LaeParams):
        out = transform_lae(img, transform)
    elif isinstance(transform, AeParams):
        out = transform_ae(img, transform)
    else:
        out = transform_images(img, transform)
    n = write_embeddings(out, args.out)
    print(f"wrote {out.count}x{out.dim} embeddings ({n} bytes) to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    img = read_embeddings(resolve_path(args.img_emb))
    labels = read_labels(resolve_path(args.labels))
    metrics = _parse_metrics(args.metrics) if args.metrics else METRIC_NAMES
    seeds = _parse_int_list(args.seeds) if args.seeds else (0, 1, 2, 3, 4)
    per_run = []
    skipped = 0
    for seed in seeds:
        values, skipped = evaluate_embeddings(img, labels, metrics,
                                              cluster_seed=seed)
        per_run.append(values)
    config = {"img_emb": args.img_emb, "labels": args.labels,
              "metrics": list(metrics), "seeds": list(seeds)}
    report = aggregate_runs(per_run, config=config,
                            fingerprint=config_fingerprint(config),
                            skipped_queries=skipped)
    _emit_report(report, args)
    return 0


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    report = run_experiment(cfg)
    _emit_report(report, args)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    values = list(_parse_int_list(args.values))
    results = run_sweep(cfg, args.axis, values)
    text = json.dumps(results, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote sweep results to {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_report(args) -> int:
    columns = []
    names = args.names.split(",") if args.names else None
    for i, path in enumerate(args.reports):
        doc = json.loads(Path(resolve_path(path)).read_text(encoding="utf-8"))
        report = RetrievalReport.from_json_dict(doc)
        label = names[i] if names and i < len(names) else Path(path).stem
        columns.append((label, report))
    print(render_table(columns), end="")
    return 0


def _emit_report(report: RetrievalReport, args) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
        print(f"wrote report to {args.out}")
    if getattr(args, "table", False) or not getattr(args, "out", None):
        method = report.config.get("method", "result")
        print(render_table([(method, report)]), end="")


def _add_common(parser: argparse.ArgumentParser, *, table: bool = False) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--text-emb", dest="text_emb")
    parser.add_argument("--img-emb", dest="img_emb")
    parser.add_argument("--labels")
    parser.add_argument("--dim", type=int)
    parser.add_argument("--seeds", help="comma-separated seeds, default 0,1,2,3,4")
    parser.add_argument("--metrics", help=f"comma-separated from {','.join(METRIC_NAMES)}")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--patience", type=int)
    if table:
        parser.add_argument("--table", action="store_true",
                            help="print the fixed-width table as well")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptproj",
        description="Learn similarity-specific projections from text-prompt "
                    "embeddings and evaluate retrieval quality.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a transform and save it as JSON")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("transform", help="apply a saved transform to embeddings")
    p.add_argument("--transform", required=True)
    p.add_argument("--img-emb", dest="img_emb", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_transform)

    p = sub.add_parser("evaluate", help="evaluate an embedding file against labels")
    p.add_argument("--img-emb", dest="img_emb", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--metrics")
    p.add_argument("--seeds")
    p.add_argument("--out")
    p.add_argument("--table", action="store_true")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("run", help="fit + transform + evaluate across seeds")
    _add_common(p, table=True)
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="run the experiment across an axis")
    _add_common(p)
    p.add_argument("--axis", choices=("dim", "prompts"), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--out")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("report", help="render saved reports side by side")
    p.add_argument("reports", nargs="+")
    p.add_argument("--names", help="comma-separated column names")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
