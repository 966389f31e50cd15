"""CSV/JSON readers and writers for every file the pipeline exchanges."""

from __future__ import annotations

import csv
import json
from datetime import datetime
from pathlib import Path

import numpy as np

from .features import FEATURE_NAMES
from .geo import GeoPoint
from .ranker import RankingDataset
from .synth import Candidate, DecisionEvent, Station

EVENT_COLUMNS = (
    "event_id",
    "ev_id",
    "journey_id",
    "timestamp",
    "lat",
    "lon",
    "community_area",
    "role",
    "soc_e",
    "energy_wh",
    "capacity_wh",
    "quantity_wh",
    "model_id",
    "candidate_station_id",
    "distance_km",
    "charging_speed_kw",
    "popularity",
    "candidate_count",
)
STATION_COLUMNS = ("station_id", "lat", "lon", "charging_speed_kw", "ports") + tuple(f"p{h:02d}" for h in range(24))
LABEL_COLUMNS = ("event_id", "candidate_station_id", "topsis_r", "r_hat", "p_soft", "grade")
FEATURE_ID_COLUMNS = ("event_id", "candidate_station_id", "split", "grade", "topsis_grade")


def fmt(x: float) -> str:
    return f"{x:.6f}"


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        for row in reader:
            yield header, row


def _check_header(path, expected) -> None:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None or tuple(header[: len(expected)]) != tuple(expected):
        raise ValueError(f"{path}: unexpected header {header}")


# ---------------------------------------------------------------- events


def write_events_csv(path, events) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(EVENT_COLUMNS)
        for e in events:
            head = [
                e.event_id,
                e.ev_id,
                e.journey_id,
                e.timestamp.isoformat(),
                fmt(e.location.lat),
                fmt(e.location.lon),
                e.community_area,
                e.role,
                fmt(e.soc_e),
                fmt(e.energy_level_wh),
                fmt(e.battery_capacity_wh),
                fmt(e.quantity_wh),
                e.model_id,
            ]
            if not e.candidates:
                w.writerow(head + ["", "", "", "", 0])
                continue
            for c in e.candidates:
                w.writerow(
                    head
                    + [c.station_id, fmt(c.distance_km), fmt(c.charging_speed_kw), fmt(c.popularity), e.candidate_count]
                )


def read_events_csv(path) -> list[DecisionEvent]:
    _check_header(path, EVENT_COLUMNS)
    events: list[DecisionEvent] = []
    current = None
    for _, row in _rows(path):
        rec = dict(zip(EVENT_COLUMNS, row))
        if current is None or current.event_id != rec["event_id"]:
            current = DecisionEvent(
                event_id=rec["event_id"],
                ev_id=rec["ev_id"],
                journey_id=rec["journey_id"],
                timestamp=datetime.fromisoformat(rec["timestamp"]),
                location=GeoPoint(float(rec["lat"]), float(rec["lon"])),
                community_area=int(rec["community_area"]),
                role=rec["role"],
                soc_e=float(rec["soc_e"]),
                energy_level_wh=float(rec["energy_wh"]),
                battery_capacity_wh=float(rec["capacity_wh"]),
                quantity_wh=float(rec["quantity_wh"]),
                model_id=int(rec["model_id"]),
            )
            events.append(current)
        if rec["candidate_station_id"]:
            current.candidates.append(
                Candidate(
                    rec["candidate_station_id"],
                    float(rec["distance_km"]),
                    float(rec["charging_speed_kw"]),
                    float(rec["popularity"]),
                )
            )
    for e in events:
        if e.role not in ("P", "C"):
            raise ValueError(f"{path}: event {e.event_id} has invalid role {e.role!r}")
    return events


# ---------------------------------------------------------------- stations


def write_stations_csv(path, stations) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(STATION_COLUMNS)
        for s in stations:
            w.writerow(
                [s.station_id, fmt(s.location.lat), fmt(s.location.lon), fmt(s.charging_speed_kw), s.ports]
                + [fmt(v) for v in s.popularity_profile]
            )


def read_stations_csv(path) -> list[Station]:
    _check_header(path, STATION_COLUMNS)
    out = []
    for _, row in _rows(path):
        out.append(
            Station(
                station_id=row[0],
                location=GeoPoint(float(row[1]), float(row[2])),
                charging_speed_kw=float(row[3]),
                ports=int(row[4]),
                popularity_profile=np.array([float(v) for v in row[5:29]]),
            )
        )
    return out


# ---------------------------------------------------------------- labels


def write_labels_csv(path, labels) -> None:
    fh, w = _writer(path)
    sizes = np.diff(labels.ptr)
    event_of_row = np.repeat(labels.event_ids, sizes)
    with fh:
        w.writerow(LABEL_COLUMNS)
        for i in range(len(labels.station_ids)):
            w.writerow(
                [
                    event_of_row[i],
                    labels.station_ids[i],
                    fmt(labels.topsis_r[i]),
                    fmt(labels.r_hat[i]),
                    fmt(labels.p_soft[i]),
                    int(labels.grade[i]),
                ]
            )


def read_labels_csv(path) -> dict:
    """Columns of ``labels.csv`` as arrays."""
    _check_header(path, LABEL_COLUMNS)
    cols = {c: [] for c in LABEL_COLUMNS}
    for _, row in _rows(path):
        for c, v in zip(LABEL_COLUMNS, row):
            cols[c].append(v)
    out = {c: np.array(cols[c], dtype=str) for c in ("event_id", "candidate_station_id")}
    for c in ("topsis_r", "r_hat", "p_soft"):
        out[c] = np.array(cols[c], dtype=float)
    out["grade"] = np.array(cols["grade"], dtype=int)
    return out


# ---------------------------------------------------------------- features


def write_features_csv(path, prepared) -> None:
    """Identifier, split and label columns followed by features in canonical order."""
    labels = prepared.labels
    sizes = np.diff(labels.ptr)
    event_of_row = np.repeat(labels.event_ids, sizes)
    split_of_row = np.repeat(prepared.split, sizes)
    fh, w = _writer(path)
    with fh:
        w.writerow(FEATURE_ID_COLUMNS + FEATURE_NAMES)
        for i in range(prepared.X.shape[0]):
            w.writerow(
                [event_of_row[i], labels.station_ids[i], split_of_row[i], int(labels.grade[i]), int(labels.topsis_grade[i])]
                + [fmt(v) for v in prepared.X[i]]
            )


def read_features_csv(path, label: str = "grade", features=None) -> dict:
    """Return ``{split: RankingDataset}`` from ``features.csv``.

    Rows of one event must be contiguous; ``features`` selects a subset of
    feature columns by name.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        n_id = len(FEATURE_ID_COLUMNS)
        if tuple(header[:n_id]) != FEATURE_ID_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header[:n_id]}")
        names = header[n_id:]
        wanted = names if features is None else list(features)
        missing = set(wanted) - set(names)
        if missing:
            raise ValueError(f"{path}: missing feature columns {sorted(missing)}")
        idx = [names.index(f) for f in wanted]
        label_col = FEATURE_ID_COLUMNS.index(label)
        per_split: dict = {}
        for row in reader:
            eid, split = row[0], row[2]
            bucket = per_split.setdefault(split, {"events": [], "sizes": [], "y": [], "X": []})
            if not bucket["events"] or bucket["events"][-1] != eid:
                bucket["events"].append(eid)
                bucket["sizes"].append(0)
            bucket["sizes"][-1] += 1
            bucket["y"].append(int(row[label_col]))
            vals = row[n_id:]
            bucket["X"].append([float(vals[i]) for i in idx])
    out = {}
    for split, b in per_split.items():
        if len(set(b["events"])) != len(b["events"]):
            raise ValueError(f"{path}: rows of an event are not contiguous in split {split!r}")
        ptr = np.concatenate([[0], np.cumsum(b["sizes"])])
        out[split] = RankingDataset(np.array(b["X"]), np.array(b["y"]), ptr, np.array(b["events"]))
    return out, wanted


# ---------------------------------------------------------------- reports


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_rows_csv(path, rows) -> None:
    """Flat table; floats with 6 decimals, ``None`` as empty."""
    if not rows:
        raise ValueError("no rows to write")
    columns = list(rows[0])
    fh, w = _writer(path)
    with fh:
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if r.get(c) is None else fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
