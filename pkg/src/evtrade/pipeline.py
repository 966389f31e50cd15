"""End-to-end runs: simulation, labels, query splits, training, sweeps and ablation."""

from __future__ import annotations

import copy
import dataclasses
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import features as F
from .config import ABLATION_VARIANTS, ExperimentConfig
from .labeling import LabelTable, label_events
from .metrics import CUTOFFS, evaluate_queries
from .ranker import GbdtRankerModel, RankingDataset, train
from .synth import (
    PROVIDER,
    StationIndex,
    assign_roles,
    build_decision_events,
    generate_world,
    simulate_journeys,
)

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


# ---------------------------------------------------------------- splits


def split_queries(event_ids, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    """Seeded shuffle of event ids, then contiguous slices by fraction."""
    ids = list(event_ids)
    fractions = tuple(float(f) for f in fractions)
    if len(ids) < len(fractions):
        raise ValueError(f"need at least {len(fractions)} events, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("event ids must be unique")
    if any(f <= 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ValueError("fractions must be positive and sum to 1")
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    bounds = [0] + [int(round(c * len(ids))) for c in np.cumsum(fractions)[:-1]] + [len(ids)]
    return tuple(shuffled[a:b] for a, b in zip(bounds[:-1], bounds[1:]))


def kfold_queries(event_ids, K: int, seed: int = 0):
    """K disjoint folds whose sizes differ by at most one (larger folds first)."""
    ids = list(event_ids)
    if K < 2:
        raise ValueError("K must be >= 2")
    if K > len(ids):
        raise ValueError(f"K={K} exceeds the number of events ({len(ids)})")
    perm = np.random.default_rng(seed).permutation(len(ids))
    return [[ids[i] for i in part] for part in np.array_split(perm, K)]


def nearest_rank(sorted_values, pct: float):
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def candidate_distribution_stats(events) -> dict:
    counts = sorted(e.candidate_count for e in events)
    if not counts:
        raise ValueError("no events")
    n = len(counts)
    arr = np.asarray(counts)
    return {
        "n_events": n,
        "mean": math.fsum(counts) / n,
        "median": nearest_rank(counts, 50),
        "p90": nearest_rank(counts, 90),
        "p95": nearest_rank(counts, 95),
        "pct_zero": 100.0 * float(np.mean(arr == 0)),
        "pct_le3": 100.0 * float(np.mean(arr <= 3)),
        "pct_le5": 100.0 * float(np.mean(arr <= 5)),
        "pct_le10": 100.0 * float(np.mean(arr <= 10)),
    }


# ---------------------------------------------------------------- stages


@dataclass
class Simulation:
    world: object
    journeys: list
    events: list
    index: StationIndex


def simulate(cfg: ExperimentConfig) -> Simulation:
    world = generate_world(cfg.world, cfg.seed)
    journeys = simulate_journeys(world, cfg.n_journeys, cfg.seed)
    assign_roles(journeys, cfg.roles, cfg.seed)
    index = StationIndex(world.stations)
    events = build_decision_events(journeys, index, cfg.geo, cfg.world)
    logger.info("simulated %d journeys, %d decision events", len(journeys), len(events))
    return Simulation(world, journeys, events, index)


def rebuild(sim: Simulation, cfg: ExperimentConfig) -> Simulation:
    """Reassign roles and candidate sets on the same world and journeys."""
    journeys = [copy.copy(j) for j in sim.journeys]
    assign_roles(journeys, cfg.roles, cfg.seed)
    events = build_decision_events(journeys, sim.index, cfg.geo, cfg.world)
    return Simulation(sim.world, journeys, events, sim.index)


def provider_share(journeys) -> float:
    if not journeys:
        return 0.0
    return 100.0 * sum(j.role == PROVIDER for j in journeys) / len(journeys)


@dataclass
class Prepared:
    """Labelled, split and encoded query-item rows (labelable events only)."""

    labels: LabelTable
    split: np.ndarray  # per event
    cols: dict
    encoder: F.FeatureEncoder
    X: np.ndarray

    def dataset(self, split: str, label: str = "em", features=None) -> RankingDataset:
        y_all = self.labels.grade if label == "em" else self.labels.topsis_grade
        queries = np.flatnonzero(self.split == split)
        if queries.size == 0:
            raise ValueError(f"split {split!r} is empty")
        ptr = self.labels.ptr
        rows = np.concatenate([np.arange(ptr[q], ptr[q + 1]) for q in queries])
        sizes = ptr[queries + 1] - ptr[queries]
        X = self.X[rows] if features is None else self.X[np.ix_(rows, F.feature_indices(features))]
        return RankingDataset(X, y_all[rows], np.concatenate([[0], np.cumsum(sizes)]), self.labels.event_ids[queries])


def assign_splits(events, cfg: ExperimentConfig) -> dict:
    """Event id -> split name, over all events so the split is shared across variants."""
    parts = split_queries([e.event_id for e in events], cfg.split_fractions, cfg.seed)
    return {eid: name for name, part in zip(SPLITS, parts) for eid in part}


def prepare(events, cfg: ExperimentConfig, split_map: dict | None = None, labels: LabelTable | None = None) -> Prepared:
    split_map = split_map or assign_splits(events, cfg)
    labels = labels or label_events(events, cfg.topsis, cfg.em, cfg.grades, K=cfg.em_k)
    split = np.array([split_map[eid] for eid in labels.event_ids])
    cols = F.raw_columns(events)
    row_split = np.repeat(split, np.diff(labels.ptr))
    encoder = F.FeatureEncoder.fit(cols, row_split == "train")
    X = encoder.transform(cols)
    return Prepared(labels, split, cols, encoder, X)


def evaluate(model: GbdtRankerModel, ds: RankingDataset, threads: int = 1) -> dict:
    return evaluate_queries(model.predict(ds.X, threads), ds.y, ds.ptr, CUTOFFS)


def fit_and_evaluate(prep: Prepared, cfg: ExperimentConfig, threads: int = 1, label: str = "em", features=None):
    names = F.FEATURE_NAMES if features is None else tuple(features)
    tr = prep.dataset("train", label, features)
    va = prep.dataset("valid", label, features)
    te = prep.dataset("test", label, features)
    t0 = time.perf_counter()
    model = train(tr, va, cfg.train, threads=threads, feature_names=names)
    elapsed = time.perf_counter() - t0
    metrics = evaluate(model, te, threads)
    metrics["train_seconds"] = elapsed
    metrics["best_iteration"] = model.best_iteration
    return model, metrics


def metric_columns(metrics: dict) -> dict:
    keys = [f"ndcg@{k}" for k in CUTOFFS] + [f"recall@{k}" for k in CUTOFFS] + ["mrr"]
    return {k: metrics.get(k) for k in keys}


# ---------------------------------------------------------------- experiments


def run_experiment(cfg: ExperimentConfig, threads: int = 1, sim: Simulation | None = None) -> dict:
    sim = sim or simulate(cfg)
    prep = prepare(sim.events, cfg)
    model, metrics = fit_and_evaluate(prep, cfg, threads)
    return {
        "candidate_stats": candidate_distribution_stats(sim.events),
        "split_sizes": {s: int(np.sum(prep.split == s)) for s in SPLITS},
        "em_model": prep.labels.em_model.to_dict(),
        "metrics": metrics,
        "model": model,
        "prepared": prep,
    }


def run_sensitivity_radius(cfg: ExperimentConfig, threads: int = 1, sim: Simulation | None = None) -> list[dict]:
    sim = sim or simulate(cfg)
    split_map = assign_splits(sim.events, cfg)
    rows = []
    for radius in cfg.radius_sweep:
        sub = cfg.replace(geo=dataclasses.replace(cfg.geo, r_max_km=radius))
        variant = rebuild(sim, sub)
        stats = candidate_distribution_stats(variant.events)
        _, metrics = fit_and_evaluate(prepare(variant.events, sub, split_map), sub, threads)
        rows.append({"radius_km": radius, **stats, **metric_columns(metrics), "best_iteration": metrics["best_iteration"]})
        logger.info("radius %.1f km: ndcg@10=%.4f", radius, metrics["ndcg@10"])
    return rows


def run_sensitivity_soc(cfg: ExperimentConfig, threads: int = 1, sim: Simulation | None = None) -> list[dict]:
    sim = sim or simulate(cfg)
    split_map = assign_splits(sim.events, cfg)
    rows = []
    for cutoff in cfg.provider_cutoff_sweep:
        sub = cfg.replace(roles=dataclasses.replace(cfg.roles, provider_cutoff=cutoff))
        variant = rebuild(sim, sub)
        share = provider_share(variant.journeys)
        _, metrics = fit_and_evaluate(prepare(variant.events, sub, split_map), sub, threads)
        rows.append(
            {
                "provider_cutoff": cutoff,
                "provider_share_pct": share,
                "consumer_share_pct": 100.0 - share,
                **metric_columns(metrics),
                "best_iteration": metrics["best_iteration"],
            }
        )
        logger.info("cutoff %.2f: provider share %.2f%%, ndcg@10=%.4f", cutoff, share, metrics["ndcg@10"])
    return rows


def run_ablation(cfg: ExperimentConfig, threads: int = 1, sim: Simulation | None = None) -> list[dict]:
    sim = sim or simulate(cfg)
    prep = prepare(sim.events, cfg)
    rows = []
    for tag in ABLATION_VARIANTS:
        label, feats = tag.split("_")
        features = F.CANDIDATE_FEATURES if feats == "candidate" else None
        _, metrics = fit_and_evaluate(prep, cfg, threads, label=label, features=features)
        rows.append({"variant": tag, "labels": label, "features": feats, **metric_columns(metrics)})
        logger.info("ablation %s: ndcg@1=%.4f ndcg@10=%.4f", tag, metrics["ndcg@1"], metrics["ndcg@10"])
    return rows
