"""Retrieval and clustering evaluation suite.

Ranking metrics order all other items by descending cosine similarity with
ties broken by ascending row index, which keeps reports reproducible and
lets the optimized paths be compared bit-for-bit against a naive reference
evaluator. Queries whose class has a single member have no meaningful R
and are skipped; the skip count is surfaced in reports.

Per-query sums are accumulated strictly left to right (np.cumsum), so an
independent evaluator that follows the metric definitions with running
Python sums produces bitwise-identical values.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DataError
from .hypersphere import normalized_rows
from .rng import make_rng
from .store import EmbeddingSet, LabelSet

METRIC_NAMES = ("map_at_r", "prec_at_1", "r_prec", "ami", "nmi", "map", "mrr")

DISPLAY_NAMES = {
    "map_at_r": "MAP@R",
    "prec_at_1": "Prec@1",
    "r_prec": "R-Prec",
    "ami": "AMI",
    "nmi": "NMI",
    "map": "MAP",
    "mrr": "MRR",
}

_RANKING_METRICS = ("map_at_r", "prec_at_1", "r_prec", "map", "mrr")
_CLUSTER_METRICS = ("ami", "nmi")

_CHUNK = 256


@dataclass(frozen=True)
class RankedRetrieval:
    """Neighbors of one query, ordered by descending cosine similarity."""

    query_index: int
    query_id: str
    neighbor_indices: np.ndarray
    similarities: np.ndarray
    relevance: np.ndarray | None = None


def rank_neighbors(query_index: int, E: EmbeddingSet,
                   labels: LabelSet | None = None) -> RankedRetrieval:
    """All other rows by descending similarity; ties by ascending index."""
    if E.count < 2:
        raise DataError(f"need at least 2 rows to rank, got {E.count}")
    if not 0 <= query_index < E.count:
        raise DataError(f"query index {query_index} out of range")
    X = normalized_rows(E)
    sims = X @ X[query_index]
    sims[query_index] = -np.inf
    order = np.argsort(-sims, kind="stable")[: E.count - 1]
    relevance = None
    if labels is not None:
        aligned = np.asarray(labels.aligned_to(E), dtype=object)
        relevance = aligned[order] == aligned[query_index]
    return RankedRetrieval(
        query_index=query_index,
        query_id=E.row_name(query_index),
        neighbor_indices=order,
        similarities=sims[order],
        relevance=relevance,
    )


def _aligned_label_array(E: EmbeddingSet, labels: LabelSet) -> np.ndarray:
    return np.asarray(labels.aligned_to(E), dtype=object)


def _class_sizes(aligned: np.ndarray) -> np.ndarray:
    counts = Counter(aligned.tolist())
    return np.array([counts[l] for l in aligned.tolist()], dtype=np.intp)


def per_query_ranking_metrics(
    E: EmbeddingSet, labels: LabelSet
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Ranking metrics for each eligible query (class size >= 2).

    Returns (values keyed by metric name, indices of the eligible queries);
    value arrays follow query index order.
    """
    aligned = _aligned_label_array(E, labels)
    sizes = _class_sizes(aligned)
    eligible = sizes >= 2
    if not np.any(eligible):
        raise DataError("every class has a single member; no query is evaluable")

    m = E.count
    X = normalized_rows(E)
    per_query: dict[str, list[float]] = {name: [] for name in _RANKING_METRICS}
    ranks = np.arange(1, m, dtype=np.float64)

    for start in range(0, m, _CHUNK):
        stop = min(start + _CHUNK, m)
        sims = X[start:stop] @ X.T
        for local, query in enumerate(range(start, stop)):
            if not eligible[query]:
                continue
            row = sims[local].copy()
            row[query] = -np.inf
            order = np.argsort(-row, kind="stable")[: m - 1]
            rel = (aligned[order] == aligned[query]).astype(np.float64)
            r = int(sizes[query]) - 1
            cum = np.cumsum(rel)
            terms = (cum / ranks) * rel
            per_query["prec_at_1"].append(float(rel[0]))
            per_query["r_prec"].append(float(cum[r - 1] / r))
            per_query["map_at_r"].append(float(np.cumsum(terms[:r])[-1] / r))
            per_query["map"].append(float(np.cumsum(terms)[-1] / r))
            first = int(np.argmax(rel))
            per_query["mrr"].append(1.0 / (first + 1))

    values = {name: np.asarray(vals) for name, vals in per_query.items()}
    return values, np.flatnonzero(eligible)


def _ranking_pass(E: EmbeddingSet, labels: LabelSet) -> tuple[dict, int]:
    per_query, eligible_indices = per_query_ranking_metrics(E, labels)
    values = {
        name: float(np.cumsum(vals)[-1] / len(vals))
        for name, vals in per_query.items()
    }
    return values, E.count - len(eligible_indices)


def precision_at_1(E: EmbeddingSet, labels: LabelSet) -> float:
    """Fraction of queries whose nearest neighbor shares their label."""
    return _ranking_pass(E, labels)[0]["prec_at_1"]


def r_precision(E: EmbeddingSet, labels: LabelSet) -> float:
    """Mean over queries of (relevant within top R)/R with R = class size - 1."""
    return _ranking_pass(E, labels)[0]["r_prec"]


def map_at_r(E: EmbeddingSet, labels: LabelSet) -> float:
    """Mean average precision truncated at R = class size - 1."""
    return _ranking_pass(E, labels)[0]["map_at_r"]


def mean_average_precision(E: EmbeddingSet, labels: LabelSet) -> float:
    """Average precision over the full ranking, averaged over queries."""
    return _ranking_pass(E, labels)[0]["map"]


def mean_reciprocal_rank(E: EmbeddingSet, labels: LabelSet) -> float:
    """Mean of 1/(rank of the first relevant item)."""
    return _ranking_pass(E, labels)[0]["mrr"]


def _kmeanspp_seeds(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    chosen = [int(rng.integers(m))]
    dist = 1.0 - X @ X[chosen[0]]
    for _ in range(1, k):
        weights = np.maximum(dist, 0.0) ** 2
        total = float(weights.sum())
        if total <= 0.0:
            remaining = np.setdiff1d(np.arange(m), np.asarray(chosen))
            nxt = int(remaining[0])
        else:
            nxt = int(rng.choice(m, p=weights / total))
        chosen.append(nxt)
        dist = np.minimum(dist, 1.0 - X @ X[nxt])
    return X[np.asarray(chosen)].copy()


def _kmeans_run(X: np.ndarray, k: int, rng: np.random.Generator,
                max_iterations: int) -> tuple[np.ndarray, list[float]]:
    m = X.shape[0]
    centroids = _kmeanspp_seeds(X, k, rng)
    assign = np.full(m, -1, dtype=np.intp)
    history: list[float] = []
    for _ in range(max_iterations):
        sims = X @ centroids.T
        new_assign = sims.argmax(axis=1)
        # Re-seed empty clusters from the point farthest from its centroid.
        present = np.bincount(new_assign, minlength=k)
        if np.any(present == 0):
            dist = 1.0 - sims[np.arange(m), new_assign]
            for c in np.flatnonzero(present == 0):
                far = int(np.argmax(dist))
                centroids[c] = X[far]
                new_assign[far] = c
                dist[far] = -np.inf
        history.append(
            float(np.sum(1.0 - np.einsum("ij,ij->i", X, centroids[new_assign])))
        )
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = X[assign == c]
            total = members.sum(axis=0)
            norm = float(np.linalg.norm(total))
            if norm > 1e-12:
                centroids[c] = total / norm
    return assign, history


def kmeans(E: EmbeddingSet, k: int, seed: int, max_iterations: int = 300,
           with_history: bool = False):
    """Spherical k-means with k-means++ style seeding; deterministic per seed."""
    if not 1 <= k <= E.count:
        raise ConfigError(f"k={k} out of range for {E.count} rows")
    X = normalized_rows(E)
    assign, history = _kmeans_run(X, k, make_rng(seed), max_iterations)
    if with_history:
        return assign, history
    return assign


def _contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"partitions must be equal-length 1-D, got {a.shape}, {b.shape}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


def _mutual_information(table: np.ndarray) -> float:
    n = table.sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    nz = table > 0
    nij = table[nz].astype(np.float64)
    outer = np.outer(a, b)[nz].astype(np.float64)
    return float(np.sum((nij / n) * (np.log(nij * n) - np.log(outer))))


def _expected_mutual_information(table: np.ndarray) -> float:
    """Permutation-model E[MI] for fixed marginals (hypergeometric weights)."""
    n = int(table.sum())
    a = table.sum(axis=1).astype(np.int64)
    b = table.sum(axis=0).astype(np.int64)
    log_n = np.log(n)
    total = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            log_term = np.log(nij) + log_n - np.log(ai) - np.log(bj)
            log_weight = (
                gammaln(ai + 1) + gammaln(bj + 1)
                + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - gammaln(n + 1) - gammaln(nij + 1)
                - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            total += float(np.sum((nij / n) * log_term * np.exp(log_weight)))
    return total


def nmi(assignments, labels) -> float:
    """I(A;L) normalized by the arithmetic mean of the entropies."""
    table = _contingency(assignments, labels)
    h_a = _entropy(table.sum(axis=1))
    h_b = _entropy(table.sum(axis=0))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    mi = _mutual_information(table)
    # MI <= mean entropy holds mathematically; trim float drift at the edges.
    return float(np.clip(mi / ((h_a + h_b) / 2.0), 0.0, 1.0))


def ami(assignments, labels) -> float:
    """Mutual information adjusted for chance under the permutation model."""
    table = _contingency(assignments, labels)
    h_a = _entropy(table.sum(axis=1))
    h_b = _entropy(table.sum(axis=0))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    mi = _mutual_information(table)
    emi = _expected_mutual_information(table)
    normalizer = (h_a + h_b) / 2.0
    denominator = normalizer - emi
    # Guard against a vanishing denominator, as in the standard formulation.
    tiny = np.finfo(np.float64).eps
    if denominator < 0:
        denominator = min(denominator, -tiny)
    else:
        denominator = max(denominator, tiny)
    return float(min((mi - emi) / denominator, 1.0))


def evaluate_embeddings(
    E: EmbeddingSet,
    labels: LabelSet,
    metric_names: tuple[str, ...] = METRIC_NAMES,
    cluster_seed: int = 0,
) -> tuple[dict[str, float], int]:
    """Compute the selected metrics; returns (values, skipped query count).

    Clustering metrics run spherical k-means with k equal to the number of
    distinct labels, seeded by ``cluster_seed``.
    """
    unknown = [m for m in metric_names if m not in METRIC_NAMES]
    if unknown:
        raise ConfigError(f"unknown metrics: {unknown}")
    values: dict[str, float] = {}
    skipped = 0
    wanted_ranking = [m for m in metric_names if m in _RANKING_METRICS]
    if wanted_ranking:
        ranking_values, skipped = _ranking_pass(E, labels)
        for name in wanted_ranking:
            values[name] = ranking_values[name]
    if any(m in _CLUSTER_METRICS for m in metric_names):
        aligned = labels.aligned_to(E)
        k = len(set(aligned))
        assignments = kmeans(E, k=k, seed=cluster_seed)
        if "ami" in metric_names:
            values["ami"] = ami(assignments, aligned)
        if "nmi" in metric_names:
            values["nmi"] = nmi(assignments, aligned)
    return {m: values[m] for m in metric_names}, skipped


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std: float
    runs: tuple[float, ...]


@dataclass(frozen=True)
class RetrievalReport:
    """Per-metric statistics across seeds plus the configuration fingerprint."""

    metrics: dict[str, MetricStat]
    config: dict = field(default_factory=dict)
    fingerprint: str = ""
    skipped_queries: int = 0

    def __post_init__(self):
        for name, stat in self.metrics.items():
            low = -1.0 if name == "ami" else 0.0
            for value in stat.runs + (stat.mean,):
                if not low - 1e-9 <= value <= 1.0 + 1e-9:
                    raise DataError(
                        f"metric {name} value {value} outside [{low}, 1]"
                    )

    def to_json_dict(self) -> dict:
        doc: dict = {
            name: {"mean": stat.mean, "std": stat.std, "runs": list(stat.runs)}
            for name, stat in self.metrics.items()
        }
        doc["_config"] = self.config
        doc["_fingerprint"] = self.fingerprint
        doc["_skipped_queries"] = self.skipped_queries
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RetrievalReport":
        metrics = {
            name: MetricStat(
                mean=float(entry["mean"]),
                std=float(entry["std"]),
                runs=tuple(float(x) for x in entry["runs"]),
            )
            for name, entry in doc.items()
            if not name.startswith("_")
        }
        return cls(
            metrics=metrics,
            config=doc.get("_config", {}),
            fingerprint=doc.get("_fingerprint", ""),
            skipped_queries=int(doc.get("_skipped_queries", 0)),
        )


def aggregate_runs(
    per_run: list[dict[str, float]],
    config: dict,
    fingerprint: str,
    skipped_queries: int = 0,
) -> RetrievalReport:
    """Mean/population-std across runs, in run order."""
    if not per_run:
        raise ConfigError("no runs to aggregate")
    names = list(per_run[0])
    metrics = {}
    for name in names:
        runs = tuple(run[name] for run in per_run)
        arr = np.asarray(runs, dtype=np.float64)
        metrics[name] = MetricStat(
            mean=float(arr.mean()), std=float(arr.std()), runs=runs
        )
    return RetrievalReport(
        metrics=metrics,
        config=config,
        fingerprint=fingerprint,
        skipped_queries=skipped_queries,
    )


def render_table(reports: list[tuple[str, RetrievalReport]]) -> str:
    """Fixed-width table: metric rows, one column per report, percent with
    one decimal ("57.4 ± 0.2")."""
    if not reports:
        raise ConfigError("no reports to render")
    names = [name for name in METRIC_NAMES
             if any(name in rep.metrics for _, rep in reports)]
    header = ["Metric"] + [col for col, _ in reports]
    rows = []
    for name in names:
        row = [DISPLAY_NAMES[name]]
        for _, rep in reports:
            stat = rep.metrics.get(name)
            if stat is None:
                row.append("---")
            else:
                row.append(f"{100 * stat.mean:.1f} ± {100 * stat.std:.1f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = []
    for r in [header] + rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
    return "\n".join(lines) + "\n"
