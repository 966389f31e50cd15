"""Rank-based graded relevance within each event."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# q values land exactly on thresholds (e.g. 1 - 1/10 vs 0.9); absorb rounding
_Q_TOL = 1e-12


@dataclass
class GradeConfig:
    G: int = 3
    kappa: tuple = (0.4, 0.7, 0.9)

    def __post_init__(self):
        k = tuple(float(v) for v in self.kappa)
        if len(k) != self.G:
            raise ValueError("need one threshold per grade")
        if any(b <= a for a, b in zip(k, k[1:])) or not (0 < k[0] and k[-1] <= 1):
            raise ValueError("thresholds must be strictly increasing in (0, 1]")
        self.kappa = k


def rank_within_event(p, tiebreak_score=None, station_ids=None) -> np.ndarray:
    """1-based ranks by descending ``p``; ties by higher ``tiebreak_score`` then station id."""
    p = np.asarray(p, dtype=float)
    n = p.size
    tb = np.zeros(n) if tiebreak_score is None else np.asarray(tiebreak_score, dtype=float)
    ids = np.arange(n).astype(str) if station_ids is None else np.asarray(station_ids, dtype=str)
    order = np.lexsort((ids, -tb, -p))
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    return ranks


def normalized_rank_score(ranks, n: int) -> np.ndarray:
    return 1.0 - (np.asarray(ranks, dtype=float) - 1.0) / max(n - 1, 1)


def grades_from_q(q, cfg: GradeConfig | None = None) -> np.ndarray:
    cfg = cfg or GradeConfig()
    q = np.asarray(q, dtype=float)
    y = np.zeros(q.shape, dtype=int)
    for g, kappa in enumerate(cfg.kappa, start=1):
        y = np.where(q >= kappa - _Q_TOL, g, y)
    return y


def graded_labels(p, cfg: GradeConfig | None = None, tiebreak_score=None, station_ids=None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    ranks = rank_within_event(p, tiebreak_score, station_ids)
    return grades_from_q(normalized_rank_score(ranks, p.size), cfg)


def graded_labels_batch(p, ptr, cfg: GradeConfig | None = None, tiebreak_score=None, station_ids=None) -> np.ndarray:
    cfg = cfg or GradeConfig()
    p = np.asarray(p, dtype=float)
    y = np.empty(p.size, dtype=int)
    for lo, hi in zip(ptr[:-1], ptr[1:]):
        tb = None if tiebreak_score is None else tiebreak_score[lo:hi]
        ids = None if station_ids is None else station_ids[lo:hi]
        y[lo:hi] = graded_labels(p[lo:hi], cfg, tb, ids)
    return y
