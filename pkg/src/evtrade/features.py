"""Query-item feature assembly, train-only scaling/encoding and correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .labeling.topsis import transaction_pressure

CANDIDATE_FEATURES = ("distance_km", "charging_speed_kw", "popularity")
EV_FEATURES = ("capacity_wh", "energy_wh", "soc_e", "pressure", "quantity_wh", "role")
TEMPORAL_FEATURES = (
    "time_of_day",
    "time_of_day_sin",
    "time_of_day_cos",
    "day_of_week",
    "day_of_week_sin",
    "day_of_week_cos",
    "week",
    "month",
    "month_sin",
    "month_cos",
)
SPATIAL_FEATURES = ("location_cell", "community_area")
CONTEXT_FEATURES = ("candidate_count",)
VEHICLE_FEATURES = ("model_id",)

FEATURE_NAMES = (
    CANDIDATE_FEATURES + EV_FEATURES + TEMPORAL_FEATURES + SPATIAL_FEATURES + CONTEXT_FEATURES + VEHICLE_FEATURES
)

SCALED_FEATURES = (
    "distance_km",
    "charging_speed_kw",
    "popularity",
    "capacity_wh",
    "energy_wh",
    "soc_e",
    "pressure",
    "quantity_wh",
    "candidate_count",
)
CATEGORICAL_FEATURES = ("role", "location_cell", "model_id")

# raw columns pulled from events before encoding
_RAW_COLUMNS = (
    "distance_km",
    "charging_speed_kw",
    "popularity",
    "capacity_wh",
    "energy_wh",
    "soc_e",
    "pressure",
    "quantity_wh",
    "role",
    "timestamp",
    "community_area",
    "candidate_count",
    "model_id",
)


def cyclic_encode(value, period):
    if period <= 0:
        raise ValueError("period must be positive")
    angle = 2.0 * np.pi * np.asarray(value, dtype=float) / period
    return np.sin(angle), np.cos(angle)


@dataclass
class Scaler:
    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        span = self.maxs - self.mins
        const = span == 0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = (x - self.mins) / np.where(const, 1.0, span)
        out = np.where(const, 0.5, out)
        return np.clip(out, 0.0, 1.0)


def fit_scaler(train) -> Scaler:
    train = np.asarray(train, dtype=float)
    if train.ndim == 1:
        train = train[:, None]
    if train.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    return Scaler(train.min(axis=0), train.max(axis=0))


def transform(scaler: Scaler, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    squeeze = rows.ndim == 1
    out = scaler.transform(rows[:, None] if squeeze else rows)
    return out[:, 0] if squeeze else out


@dataclass
class LabelEncoder:
    vocabulary: dict = field(default_factory=dict)

    @classmethod
    def fit(cls, values) -> "LabelEncoder":
        vocab = sorted({str(v) for v in values})
        return cls({v: i + 1 for i, v in enumerate(vocab)})

    def transform(self, values) -> np.ndarray:
        return np.array([self.vocabulary.get(str(v), 0) for v in values], dtype=float)


def label_encode(train_values, values=None):
    """Lexicographic codes from 1; unseen categories map to 0."""
    enc = LabelEncoder.fit(train_values)
    return enc.transform(train_values if values is None else values), enc.vocabulary


def pearson_corr(matrix):
    """Correlation matrix and a per-column zero-variance flag (two-pass)."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    centred = x - x.mean(axis=0)
    ss = np.sqrt(np.sum(centred**2, axis=0))
    degenerate = ss == 0
    denom = np.outer(ss, ss)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (centred.T @ centred) / denom
    corr = np.where(denom == 0, 0.0, corr)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr, degenerate


def raw_columns(events) -> dict:
    """Row-wise raw columns for labelable events, candidates in stored order."""
    cols = {name: [] for name in _RAW_COLUMNS}
    for e in events:
        if not e.labelable:
            continue
        p = transaction_pressure(e.soc_e, e.role)
        for c in e.candidates:
            cols["distance_km"].append(c.distance_km)
            cols["charging_speed_kw"].append(c.charging_speed_kw)
            cols["popularity"].append(c.popularity)
            cols["capacity_wh"].append(e.battery_capacity_wh)
            cols["energy_wh"].append(e.energy_level_wh)
            cols["soc_e"].append(e.soc_e)
            cols["pressure"].append(p)
            cols["quantity_wh"].append(e.quantity_wh)
            cols["role"].append(e.role)
            cols["timestamp"].append(e.timestamp)
            cols["community_area"].append(e.community_area)
            cols["candidate_count"].append(e.candidate_count)
            cols["model_id"].append(e.model_id)
    return cols


@dataclass
class FeatureEncoder:
    """Scaler and vocabularies fitted on training rows only."""

    scaler: Scaler
    vocabularies: dict
    feature_names: tuple = FEATURE_NAMES

    @classmethod
    def fit(cls, cols: dict, train_mask) -> "FeatureEncoder":
        train_mask = np.asarray(train_mask, dtype=bool)
        if not train_mask.any():
            raise ValueError("empty training split")
        scaled = np.column_stack([np.asarray(cols[n], dtype=float)[train_mask] for n in SCALED_FEATURES])
        vocabs = {}
        for name in CATEGORICAL_FEATURES:
            source = cols["community_area"] if name == "location_cell" else cols[name]
            vocabs[name] = LabelEncoder.fit(np.asarray(source, dtype=object)[train_mask]).vocabulary
        return cls(fit_scaler(scaled), vocabs)

    def transform(self, cols: dict) -> np.ndarray:
        n = len(cols["distance_km"])
        out = {}
        scaled = self.scaler.transform(np.column_stack([np.asarray(cols[c], dtype=float) for c in SCALED_FEATURES]))
        for i, name in enumerate(SCALED_FEATURES):
            out[name] = scaled[:, i]
        for name in CATEGORICAL_FEATURES:
            source = cols["community_area"] if name == "location_cell" else cols[name]
            out[name] = LabelEncoder(self.vocabularies[name]).transform(source)
        ts = cols["timestamp"]
        tod = np.array([t.hour + t.minute / 60.0 for t in ts])
        dow = np.array([t.weekday() for t in ts], dtype=float)
        week = np.array([t.isocalendar()[1] for t in ts], dtype=float)
        month = np.array([t.month for t in ts], dtype=float)
        out["time_of_day"] = tod
        out["time_of_day_sin"], out["time_of_day_cos"] = cyclic_encode(tod, 24)
        out["day_of_week"] = dow
        out["day_of_week_sin"], out["day_of_week_cos"] = cyclic_encode(dow, 7)
        out["week"] = week
        out["month"] = month
        out["month_sin"], out["month_cos"] = cyclic_encode(month, 12)
        out["community_area"] = np.asarray(cols["community_area"], dtype=float)
        matrix = np.column_stack([out[name] for name in self.feature_names]) if n else np.zeros((0, len(self.feature_names)))
        return matrix

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "scaled_features": list(SCALED_FEATURES),
            "scaler_min": self.scaler.mins.tolist(),
            "scaler_max": self.scaler.maxs.tolist(),
            "vocabularies": self.vocabularies,
        }


def feature_indices(names) -> list[int]:
    return [FEATURE_NAMES.index(n) for n in names]


def pairwise_correlation_report(matrix, names=FEATURE_NAMES) -> dict:
    corr, degenerate = pearson_corr(matrix)
    return {
        "features": list(names),
        "correlation": [[round(float(v), 6) for v in row] for row in corr],
        "degenerate": [n for n, d in zip(names, degenerate) if d],
        "max_abs_offdiag": float(np.max(np.abs(corr - np.eye(len(names))))) if len(names) > 1 else math.nan,
    }
