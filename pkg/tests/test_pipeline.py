"""Query-level splits, candidate statistics, configs and the small end-to-end run."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtrade import pipeline
from evtrade.config import ExperimentConfig
from evtrade.ranker import TrainConfig
from evtrade.synth import Candidate, WorldConfig


def tiny_config(**overrides):
    base = ExperimentConfig(
        seed=3,
        n_journeys=400,
        world=WorldConfig(n_stations=80, n_evs=50),
        train=TrainConfig(num_rounds=15, early_stopping_rounds=5),
        radius_sweep=(1.0, 3.0, 10.0),
    )
    return base.replace(**overrides)


class _E:
    def __init__(self, n):
        self.candidates = [Candidate(str(i), 1.0, 1.0, 0.5) for i in range(n)]

    @property
    def candidate_count(self):
        return len(self.candidates)


class TestSplits:
    def test_exact_sizes(self):
        parts = pipeline.split_queries(range(100), (0.7, 0.15, 0.15), seed=1)
        assert [len(p) for p in parts] == [70, 15, 15]

    @settings(max_examples=200, deadline=None)
    @given(st.integers(3, 500), st.integers(0, 2**31))
    def test_partition(self, n, seed):
        ids = [f"e{i}" for i in range(n)]
        parts = pipeline.split_queries(ids, seed=seed)
        flat = [e for p in parts for e in p]
        assert sorted(flat) == sorted(ids) and len(set(flat)) == n
        assert pipeline.split_queries(ids, seed=seed) == parts

    @pytest.mark.parametrize("ids,fr", [(["a", "b"], (0.7, 0.15, 0.15)), (["a", "a", "b"], (0.7, 0.15, 0.15)), (list("abcd"), (0.5, 0.5, 0.1))])
    def test_rejects_bad_inputs(self, ids, fr):
        with pytest.raises(ValueError):
            pipeline.split_queries(ids, fr)

    def test_kfold_examples(self):
        assert [len(f) for f in pipeline.kfold_queries(range(10), 5)] == [2] * 5
        assert [len(f) for f in pipeline.kfold_queries(range(11), 5)] == [3, 2, 2, 2, 2]
        with pytest.raises(ValueError):
            pipeline.kfold_queries(range(4), 5)
        with pytest.raises(ValueError):
            pipeline.kfold_queries(range(4), 1)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 300), st.integers(0, 1000))
    def test_kfold_partition_balanced(self, K, extra, seed):
        n = K + extra
        folds = pipeline.kfold_queries(range(n), K, seed)
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(e for f in folds for e in f) == list(range(n))


class TestStats:
    def test_hand_example(self):
        s = pipeline.candidate_distribution_stats([_E(n) for n in (0, 3, 3, 6)])
        assert (s["mean"], s["median"], s["pct_zero"], s["pct_le3"]) == (3.0, 3, 25.0, 75.0)

    def test_constant(self):
        s = pipeline.candidate_distribution_stats([_E(4)] * 9)
        assert s["median"] == s["p90"] == s["p95"] == 4

    def test_empty(self):
        with pytest.raises(ValueError):
            pipeline.candidate_distribution_stats([])

    @pytest.mark.parametrize("pct,expected", [(50, 5), (90, 9), (95, 10), (10, 1), (0, 1)])
    def test_nearest_rank(self, pct, expected):
        assert pipeline.nearest_rank(list(range(1, 11)), pct) == expected


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = tiny_config()
        path = tmp_path / "c.json"
        path.write_text(cfg.to_json())
        back = ExperimentConfig.load(path)
        assert back.to_json() == cfg.to_json()
        np.testing.assert_array_equal(back.topsis.regime_weights, cfg.topsis.regime_weights)

    @pytest.mark.parametrize(
        "doc",
        [{"bogus": 1}, {"split_fractions": [0.5, 0.5, 0.5]}, {"radius_sweep": []}, {"ablation_variant": "x"}, {"world": {"nope": 1}}],
    )
    def test_rejects_invalid(self, doc):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(doc)


@pytest.fixture(scope="module")
def tiny_sim():
    return pipeline.simulate(tiny_config())


class TestEndToEnd:
    def test_run_experiment(self, tiny_sim):
        res = pipeline.run_experiment(tiny_config(), sim=tiny_sim)
        m = res["metrics"]
        assert set(pipeline.metric_columns(m)) <= set(m)
        assert all(0 <= m[k] <= 1 for k in pipeline.metric_columns(m))
        sizes = res["split_sizes"]
        assert sum(sizes.values()) == res["prepared"].labels.n_events

    def test_split_shared_and_leak_free(self, tiny_sim):
        cfg = tiny_config()
        split_map = pipeline.assign_splits(tiny_sim.events, cfg)
        prep = pipeline.prepare(tiny_sim.events, cfg, split_map)
        ids = {s: set(prep.dataset(s).query_ids.tolist()) for s in pipeline.SPLITS}
        assert not (ids["train"] & ids["valid"] or ids["train"] & ids["test"] or ids["valid"] & ids["test"])
        assert set().union(*ids.values()) == set(prep.labels.event_ids.tolist())

    def test_rebuild_keeps_world_and_journeys(self, tiny_sim):
        cfg = tiny_config()
        sub = cfg.replace(geo=dataclasses.replace(cfg.geo, r_max_km=2.0))
        v = pipeline.rebuild(tiny_sim, sub)
        assert v.world is tiny_sim.world
        assert [j.journey_id for j in v.journeys] == [j.journey_id for j in tiny_sim.journeys]
        assert all(e.candidate_count <= 0 or max(c.distance_km for c in e.candidates) <= 2.0 for e in v.events)

    def test_sweeps_and_ablation_shapes(self, tiny_sim):
        cfg = tiny_config()
        radius = pipeline.run_sensitivity_radius(cfg, sim=tiny_sim)
        assert [r["radius_km"] for r in radius] == [1.0, 3.0, 10.0]
        assert all(a["pct_zero"] >= b["pct_zero"] and a["mean"] <= b["mean"] for a, b in zip(radius, radius[1:]))
        soc = pipeline.run_sensitivity_soc(cfg, sim=tiny_sim)
        assert len(soc) == 3 and all(0 <= r["provider_share_pct"] <= 100 for r in soc)
        abl = pipeline.run_ablation(cfg, sim=tiny_sim)
        assert [r["variant"] for r in abl] == ["topsis_full", "topsis_candidate", "em_candidate", "em_full"]
