"""File formats exchanged between pipeline stages."""

import csv

import numpy as np
import pytest

from evtrade import io, pipeline
from evtrade.config import ExperimentConfig
from evtrade.features import FEATURE_NAMES
from evtrade.synth import WorldConfig


@pytest.fixture(scope="module")
def sim():
    cfg = ExperimentConfig(seed=4, n_journeys=200, world=WorldConfig(n_stations=60, n_evs=30))
    return cfg, pipeline.simulate(cfg)


def test_events_round_trip(sim, tmp_path):
    _, s = sim
    path = tmp_path / "events.csv"
    io.write_events_csv(path, s.events)
    back = io.read_events_csv(path)
    assert [e.event_id for e in back] == [e.event_id for e in s.events]
    for a, b in zip(back, s.events):
        assert a.candidate_count == b.candidate_count and a.role == b.role and a.timestamp == b.timestamp
        for ca, cb in zip(a.candidates, b.candidates):
            assert ca.station_id == cb.station_id and ca.distance_km == pytest.approx(cb.distance_km, abs=5e-7)
    io.write_events_csv(tmp_path / "again.csv", back)
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_event_columns_and_precision(sim, tmp_path):
    _, s = sim
    path = tmp_path / "events.csv"
    io.write_events_csv(path, s.events)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == io.EVENT_COLUMNS
    i = io.EVENT_COLUMNS.index("distance_km")
    assert all(len(r[i].split(".")[1]) == 6 for r in rows[1:] if r[i])


def test_stations_round_trip(sim, tmp_path):
    _, s = sim
    io.write_stations_csv(tmp_path / "s.csv", s.world.stations)
    back = io.read_stations_csv(tmp_path / "s.csv")
    assert [b.station_id for b in back] == [a.station_id for a in s.world.stations]
    np.testing.assert_allclose(back[0].popularity_profile, s.world.stations[0].popularity_profile, atol=5e-7)


def test_labels_and_features(sim, tmp_path):
    cfg, s = sim
    prep = pipeline.prepare(s.events, cfg)
    io.write_labels_csv(tmp_path / "labels.csv", prep.labels)
    cols = io.read_labels_csv(tmp_path / "labels.csv")
    np.testing.assert_array_equal(cols["grade"], prep.labels.grade)
    io.write_features_csv(tmp_path / "features.csv", prep)
    splits, names = io.read_features_csv(tmp_path / "features.csv")
    assert tuple(names) == FEATURE_NAMES
    for name in pipeline.SPLITS:
        ref = prep.dataset(name)
        assert np.array_equal(splits[name].ptr, ref.ptr) and np.array_equal(splits[name].y, ref.y)
        np.testing.assert_allclose(splits[name].X, ref.X, atol=5e-7)
    sub, names = io.read_features_csv(tmp_path / "features.csv", label="topsis_grade", features=["popularity", "distance_km"])
    assert names == ["popularity", "distance_km"] and sub["train"].X.shape[1] == 2
    with pytest.raises(ValueError):
        io.read_features_csv(tmp_path / "features.csv", features=["nope"])


def test_bad_files(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(ValueError):
        io.read_events_csv(tmp_path / "empty.csv")
    (tmp_path / "wrong.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        io.read_stations_csv(tmp_path / "wrong.csv")
    with pytest.raises(ValueError):
        io.write_rows_csv(tmp_path / "x.csv", [])
