"""From-scratch gradient-boosted tree ranker."""

from .model import (
    OBJECTIVES,
    GbdtRankerModel,
    RankingDataset,
    TrainConfig,
    Tree,
    compute_lambdas,
    fit_tree,
    mean_ndcg,
    objective_name,
    predict,
    round_rng,
    train,
)

__all__ = [
    "OBJECTIVES",
    "GbdtRankerModel",
    "RankingDataset",
    "TrainConfig",
    "Tree",
    "compute_lambdas",
    "fit_tree",
    "mean_ndcg",
    "objective_name",
    "predict",
    "round_rng",
    "train",
]
