"""Graded-relevance ranking metrics: DCG/NDCG@k, Recall@k and MRR.

All per-query functions take relevance labels already arranged in predicted
order (best first). Aggregation helpers rank by score (descending, ties by
row index), skip degenerate queries and report how many were included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CUTOFFS = (1, 3, 5, 10)
RELEVANCE_THRESHOLD = 1


def dcg_at_k(labels, k: int) -> float:
    labels = np.asarray(labels, dtype=float)[:k]
    if labels.size == 0:
        return 0.0
    gains = np.power(2.0, labels) - 1.0
    discounts = np.log2(np.arange(2, labels.size + 2))
    return float(np.sum(gains / discounts))


def ndcg_at_k(labels, k: int) -> float | None:
    """NDCG@k, or ``None`` when the ideal DCG is zero (query excluded)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ideal = dcg_at_k(np.sort(np.asarray(labels, dtype=float))[::-1], k)
    if ideal == 0.0:
        return None
    return dcg_at_k(labels, k) / ideal


def recall_at_k(labels, k: int, tau: int = RELEVANCE_THRESHOLD) -> float | None:
    """Fraction of relevant items (label >= tau) inside the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = np.asarray(labels) >= tau
    total = int(rel.sum())
    if total == 0:
        return None
    return int(rel[:k].sum()) / total


def reciprocal_rank(labels, tau: int = RELEVANCE_THRESHOLD) -> float | None:
    rel = np.flatnonzero(np.asarray(labels) >= tau)
    if rel.size == 0:
        return None
    return 1.0 / (rel[0] + 1)


def mrr(queries, tau: int = RELEVANCE_THRESHOLD) -> float | None:
    """Mean reciprocal rank over queries given as predicted-order label lists."""
    rr = [reciprocal_rank(q, tau) for q in queries]
    rr = [v for v in rr if v is not None]
    if not rr:
        return None
    return math.fsum(rr) / len(rr)


def predicted_order(scores) -> np.ndarray:
    """Indices sorted by score descending, ties broken by index ascending."""
    scores = np.asarray(scores, dtype=float)
    return np.lexsort((np.arange(scores.size), -scores))


@dataclass
class MetricAccumulator:
    """Order-independent (sum, count) accumulation of per-query metric values."""

    sums: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def add(self, name: str, value: float | None) -> None:
        if value is None:
            return
        self.sums.setdefault(name, []).append(value)
        self.counts[name] = self.counts.get(name, 0) + 1

    def means(self) -> dict:
        return {name: math.fsum(vals) / len(vals) for name, vals in self.sums.items()}


def evaluate_queries(scores, labels, query_ptr, cutoffs=CUTOFFS, tau: int = RELEVANCE_THRESHOLD) -> dict:
    """Aggregate NDCG@k, Recall@k and MRR over queries.

    ``query_ptr`` holds CSR-style boundaries: query q spans rows
    ``query_ptr[q]:query_ptr[q+1]``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    acc = MetricAccumulator()
    n_queries = len(query_ptr) - 1
    for q in range(n_queries):
        lo, hi = query_ptr[q], query_ptr[q + 1]
        ordered = labels[lo:hi][predicted_order(scores[lo:hi])]
        for k in cutoffs:
            acc.add(f"ndcg@{k}", ndcg_at_k(ordered, k))
            acc.add(f"recall@{k}", recall_at_k(ordered, k, tau))
        acc.add("mrr", reciprocal_rank(ordered, tau))
    report = acc.means()
    report["query_counts"] = dict(acc.counts)
    report["n_queries"] = n_queries
    return report
