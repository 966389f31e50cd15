"""Graded-relevance label construction for decision events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grades import GradeConfig, graded_labels, graded_labels_batch
from .mixture import EmConfig, EmModel, em_fit, em_smooth, select_k
from .topsis import (
    TopsisConfig,
    event_weights,
    normalize_event,
    regime_memberships,
    topsis_batch,
    topsis_score,
    transaction_pressure,
)

__all__ = [
    "EmConfig",
    "EmModel",
    "GradeConfig",
    "LabelTable",
    "TopsisConfig",
    "em_fit",
    "em_smooth",
    "event_weights",
    "graded_labels",
    "label_events",
    "normalize_event",
    "regime_memberships",
    "select_k",
    "topsis_score",
    "transaction_pressure",
]


@dataclass
class LabelTable:
    """Per-candidate label columns in CSR layout over labelable events."""

    event_ids: np.ndarray  # per event
    ptr: np.ndarray
    station_ids: np.ndarray  # per row
    topsis_r: np.ndarray
    r_hat: np.ndarray
    p_soft: np.ndarray
    grade: np.ndarray
    em_model: EmModel | None = None
    topsis_grade: np.ndarray | None = None

    @property
    def n_events(self) -> int:
        return len(self.event_ids)


def event_arrays(events):
    """CSR arrays for labelable events: ids, ptr, raw criteria, station ids, roles, pressures."""
    events = [e for e in events if e.labelable]
    sizes = np.array([e.candidate_count for e in events], dtype=np.int64)
    ptr = np.concatenate([[0], np.cumsum(sizes)])
    raw = np.array(
        [[c.distance_km, c.charging_speed_kw, c.popularity] for e in events for c in e.candidates], dtype=float
    ).reshape(-1, 3)
    station_ids = np.array([c.station_id for e in events for c in e.candidates], dtype=str)
    roles = np.array([e.role for e in events], dtype=str)
    pressures = np.array([transaction_pressure(e.soc_e, e.role) for e in events])
    event_ids = np.array([e.event_id for e in events], dtype=str)
    return event_ids, ptr, raw, station_ids, roles, pressures


def label_events(
    events,
    topsis_cfg: TopsisConfig | None = None,
    em_cfg: EmConfig | None = None,
    grade_cfg: GradeConfig | None = None,
    K: int | None = None,
) -> LabelTable:
    """TOPSIS scores, EM smoothing and graded labels for all labelable events.

    ``K=None`` selects the number of mixture components by BIC. The grades
    obtained straight from TOPSIS ranks (no smoothing) are kept in
    ``topsis_grade`` for ablations.
    """
    topsis_cfg = topsis_cfg or TopsisConfig()
    em_cfg = em_cfg or EmConfig()
    grade_cfg = grade_cfg or GradeConfig()
    event_ids, ptr, raw, station_ids, roles, pressures = event_arrays(events)
    if len(event_ids) == 0:
        raise ValueError("no labelable events")
    res = topsis_batch(raw, ptr, roles, pressures, topsis_cfg)
    r = res.closeness
    if K is None:
        K, fits = select_k(r, em_cfg)
        model = fits[K]
    else:
        model = em_fit(r, K, em_cfg)
    r_hat, p_soft = em_smooth(model, r, ptr, em_cfg.delta)
    grade = graded_labels_batch(p_soft, ptr, grade_cfg, tiebreak_score=r, station_ids=station_ids)
    topsis_grade = graded_labels_batch(r, ptr, grade_cfg, tiebreak_score=r, station_ids=station_ids)
    return LabelTable(event_ids, ptr, station_ids, r, r_hat, p_soft, grade, model, topsis_grade)
