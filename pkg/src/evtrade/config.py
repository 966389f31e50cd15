"""Experiment configuration, serialisable to and from JSON."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .labeling import EmConfig, GradeConfig, TopsisConfig
from .ranker import TrainConfig
from .synth import GeoConfig, RoleConfig, WorldConfig

ABLATION_VARIANTS = ("topsis_full", "topsis_candidate", "em_candidate", "em_full")


@dataclass
class ExperimentConfig:
    seed: int = 7
    n_journeys: int = 5000
    world: WorldConfig = field(default_factory=WorldConfig)
    roles: RoleConfig = field(default_factory=RoleConfig)
    geo: GeoConfig = field(default_factory=GeoConfig)
    topsis: TopsisConfig = field(default_factory=TopsisConfig)
    em: EmConfig = field(default_factory=EmConfig)
    em_k: int | None = None
    grades: GradeConfig = field(default_factory=GradeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split_fractions: tuple = (0.70, 0.15, 0.15)
    k_folds: int = 5
    ablation_variant: str = "em_full"
    radius_sweep: tuple = (1.0, 2.0, 3.0, 5.0, 10.0)
    provider_cutoff_sweep: tuple = (0.85, 0.90, 0.95)

    def __post_init__(self):
        self.split_fractions = tuple(float(f) for f in self.split_fractions)
        if len(self.split_fractions) != 3 or any(f <= 0 for f in self.split_fractions):
            raise ValueError("need three positive split fractions")
        if not math.isclose(sum(self.split_fractions), 1.0, abs_tol=1e-9):
            raise ValueError("split fractions must sum to 1")
        if not self.radius_sweep or not self.provider_cutoff_sweep:
            raise ValueError("sweep lists must be non-empty")
        self.radius_sweep = tuple(float(r) for r in self.radius_sweep)
        self.provider_cutoff_sweep = tuple(float(c) for c in self.provider_cutoff_sweep)
        if self.ablation_variant not in ABLATION_VARIANTS:
            raise ValueError(f"ablation_variant must be one of {ABLATION_VARIANTS}")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.n_journeys < 1:
            raise ValueError("n_journeys must be positive")

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            out[f.name] = _plain(getattr(self, f.name))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(doc) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        nested = {"world": WorldConfig, "roles": RoleConfig, "geo": GeoConfig, "topsis": TopsisConfig,
                  "em": EmConfig, "grades": GradeConfig, "train": TrainConfig}
        for key, value in doc.items():
            if key in nested:
                kwargs[key] = _build(nested[key], value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _plain(value):
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls, doc):
    if isinstance(doc, cls):
        return doc
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(doc) - set(names)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if isinstance(value, list):
            value = _tuplify(value)
        if key == "regime_weights" and value is not None:
            value = np.asarray(value, dtype=float)
        if key == "ev_models":
            from .synth import EvModel

            value = tuple(v if isinstance(v, EvModel) else EvModel(*v) if isinstance(v, tuple) else EvModel(**v) for v in value)
        kwargs[key] = value
    return cls(**kwargs)


def _tuplify(value):
    return tuple(_tuplify(v) if isinstance(v, list) else v for v in value)
