"""Gradient-boosted regression-tree ranker with LambdaRank and pairwise objectives."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K

logger = logging.getLogger(__name__)

OBJECTIVES = {"lambdarank": K.OBJ_LAMBDARANK, "pairwise_logistic": K.OBJ_PAIRWISE}
_ALIASES = {"pairwise": "pairwise_logistic", "lambda": "lambdarank"}


def objective_name(tag: str) -> str:
    name = _ALIASES.get(tag, tag)
    if name not in OBJECTIVES:
        raise ValueError(f"unknown objective {tag!r}; choose from {sorted(OBJECTIVES)}")
    return name


@dataclass
class TrainConfig:
    num_rounds: int = 500
    learning_rate: float = 0.05
    max_leaves: int = 31
    max_depth: int = 8
    min_samples_leaf: int = 20
    l2_leaf: float = 1.0
    row_subsample: float = 0.8
    feature_subsample: float = 0.8
    early_stopping_rounds: int = 50
    eval_k: int = 10
    objective: str = "lambdarank"
    sigmoid_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.objective = objective_name(self.objective)
        for name in ("num_rounds", "max_leaves", "max_depth", "min_samples_leaf", "early_stopping_rounds", "eval_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("learning_rate", "l2_leaf", "sigmoid_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("row_subsample", "feature_subsample"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in (0, 1]")


@dataclass
class RankingDataset:
    """Feature rows grouped into queries by ``ptr`` (CSR offsets)."""

    X: np.ndarray
    y: np.ndarray
    ptr: np.ndarray
    query_ids: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.int64)
        self.ptr = np.ascontiguousarray(self.ptr, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        n = self.X.shape[0]
        if n == 0 or self.ptr.size < 2:
            raise ValueError("empty ranking dataset")
        if self.y.shape != (n,):
            raise ValueError("one label per row required")
        if self.ptr[0] != 0 or self.ptr[-1] != n or np.any(np.diff(self.ptr) < 1):
            raise ValueError("query offsets must cover all rows with non-empty queries")
        if np.any(self.y < 0):
            raise ValueError("labels must be non-negative integers")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")

    @property
    def n_queries(self) -> int:
        return self.ptr.size - 1

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset_queries(self, queries) -> "RankingDataset":
        queries = np.asarray(queries, dtype=np.int64)
        sizes = self.ptr[queries + 1] - self.ptr[queries]
        rows = np.concatenate([np.arange(self.ptr[q], self.ptr[q + 1]) for q in queries])
        ptr = np.concatenate([[0], np.cumsum(sizes)])
        qids = None if self.query_ids is None else self.query_ids[queries]
        return RankingDataset(self.X[rows], self.y[rows], ptr, qids)

    def select_features(self, idx) -> "RankingDataset":
        return RankingDataset(self.X[:, list(idx)], self.y, self.ptr, self.query_ids)


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def to_node(self, i: int = 0) -> dict:
        if self.left[i] < 0:
            return {"leaf": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_node(int(self.left[i])),
            "right": self.to_node(int(self.right[i])),
        }

    @classmethod
    def from_node(cls, root: dict) -> "Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            if "leaf" in node:
                value[i] = float(node["leaf"])
                return i
            feature[i] = int(node["feature"])
            threshold[i] = float(node["threshold"])
            left[i] = visit(node["left"])
            right[i] = visit(node["right"])
            return i

        visit(root)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=float),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=float),
        )

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))


def _flatten(trees):
    if not trees:
        empty_i = np.zeros(0, dtype=np.int64)
        return empty_i, np.zeros(0), empty_i, empty_i, np.zeros(0), empty_i
    sizes = [t.value.size for t in trees]
    offs = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    def shift(a, o):
        return np.where(a >= 0, a + o, -1)

    feature = np.concatenate([t.feature for t in trees])
    threshold = np.concatenate([t.threshold for t in trees])
    left = np.concatenate([shift(t.left, o) for t, o in zip(trees, offs)])
    right = np.concatenate([shift(t.right, o) for t, o in zip(trees, offs)])
    value = np.concatenate([t.value for t in trees])
    return feature, threshold, left, right, value, offs


def _chunks(n: int, parts: int):
    bounds = np.linspace(0, n, max(1, min(parts, n)) + 1).astype(np.int64)
    return list(zip(bounds[:-1], bounds[1:]))


class _Runner:
    """Runs a range kernel over fixed contiguous chunks, optionally threaded."""

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self.pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def run(self, fn, n: int, *args):
        if self.pool is None or n < 2:
            fn(*args, 0, n)
            return
        futures = [self.pool.submit(fn, *args, lo, hi) for lo, hi in _chunks(n, self.threads)]
        for f in futures:
            f.result()

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _lambdas_kernel(scores, labels, ptr, objective, sigma, lam, hess, lo, hi):
    K.lambdas_range(scores, labels, ptr, lo, hi, objective, sigma, lam, hess)


def _ndcg_kernel(scores, labels, ptr, k, out, lo, hi):
    K.ndcg_range(scores, labels, ptr, lo, hi, k, out)


def _predict_kernel(X, flat, roots, lr, out, lo, hi):
    feature, threshold, left, right, value = flat
    K.predict_range(X, feature, threshold, left, right, value, roots, lr, lo, hi, out)


def compute_lambdas(scores, labels, ptr, objective: str = "lambdarank", sigma: float = 1.0, threads: int = 1):
    """Per-row ``(lambda, hessian)``; lambdas point uphill in score.

    The loss gradient is ``-lambda``. Per-query lambda sums are exactly zero.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    lam = np.zeros(scores.size)
    hess = np.zeros(scores.size)
    runner = _Runner(threads)
    try:
        runner.run(_lambdas_kernel, ptr.size - 1, scores, labels, ptr, OBJECTIVES[objective_name(objective)], float(sigma), lam, hess)
    finally:
        runner.close()
    return lam, hess


def mean_ndcg(scores, labels, ptr, k: int = 10, threads: int = 1, runner: _Runner | None = None) -> float:
    """Mean NDCG@k over queries with a non-zero ideal DCG (0.0 if none)."""
    ptr = np.ascontiguousarray(ptr, dtype=np.int64)
    out = np.empty(ptr.size - 1)
    own = runner is None
    runner = runner or _Runner(threads)
    try:
        runner.run(
            _ndcg_kernel,
            ptr.size - 1,
            np.ascontiguousarray(scores, dtype=np.float64),
            np.ascontiguousarray(labels, dtype=np.int64),
            ptr,
            k,
            out,
        )
    finally:
        if own:
            runner.close()
    valid = out[~np.isnan(out)]
    return math.fsum(valid) / valid.size if valid.size else 0.0


@dataclass
class GbdtRankerModel:
    trees: list
    learning_rate: float
    objective: str
    n_features: int
    best_iteration: int = 0
    history: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    feature_names: list | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X, threads: int = 1) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.zeros(X.shape[0])
        *flat, roots = _flatten(self.trees)
        runner = _Runner(threads)
        try:
            runner.run(_predict_kernel, X.shape[0], X, tuple(flat), roots, float(self.learning_rate), out)
        finally:
            runner.close()
        return out

    def to_dict(self) -> dict:
        return {
            "format": "gbdt-ranker/1",
            "objective": self.objective,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "best_iteration": self.best_iteration,
            "config": self.config,
            "history": self.history,
            "trees": [t.to_node() for t in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "GbdtRankerModel":
        return cls(
            trees=[Tree.from_node(t) for t in doc["trees"]],
            learning_rate=float(doc["learning_rate"]),
            objective=objective_name(doc["objective"]),
            n_features=int(doc["n_features"]),
            best_iteration=int(doc["best_iteration"]),
            history=list(doc.get("history", [])),
            config=dict(doc.get("config", {})),
            feature_names=doc.get("feature_names"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GbdtRankerModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GbdtRankerModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def predict(model: GbdtRankerModel, X, threads: int = 1) -> np.ndarray:
    return model.predict(X, threads)


def round_rng(seed: int, rnd: int) -> np.random.Generator:
    return np.random.default_rng([seed, rnd])


class TreeInputs:
    """Per-dataset structures reused by every boosting round.

    Features with few distinct values get lossless per-value bin codes;
    the rest keep a presorted row order for exact sorted scans.
    """

    def __init__(self, X, max_leaves: int):
        X = np.asarray(X, dtype=np.float64)
        n, F = X.shape
        self.XT = np.ascontiguousarray(X.T)
        self.codes = np.zeros((n, F), dtype=np.int32)
        self.low = np.zeros(F, dtype=bool)
        vals = []
        for f in range(F):
            uniq, inv = np.unique(self.XT[f], return_inverse=True)
            if uniq.size <= max(256, n // 8):
                self.low[f] = True
                self.codes[:, f] = inv
                vals.append(uniq)
            else:
                vals.append(np.zeros(0))
        self.bin_off = np.concatenate([[0], np.cumsum([v.size for v in vals])]).astype(np.int64)
        self.bin_vals = np.concatenate(vals) if vals else np.zeros(0)
        self.high = np.flatnonzero(~self.low)
        self.presorted = K.presort_columns(self.XT[self.high]) if self.high.size else np.zeros((0, n), np.int64)
        self.hists = np.zeros((max_leaves + 1, self.bin_off[-1], 3))


def fit_tree(X, grad, hess, config: TrainConfig, rng: np.random.Generator, inputs: TreeInputs | None = None) -> Tree:
    """One second-order regression tree on loss gradients ``grad``.

    Rows and features are subsampled with ``rng``. ``inputs`` caches the
    per-dataset preprocessing across rounds.
    """
    X = np.asarray(X, dtype=np.float64)
    n, F = X.shape
    if inputs is None:
        inputs = TreeInputs(X, config.max_leaves)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.maximum(np.ascontiguousarray(hess, dtype=np.float64), K.HESSIAN_FLOOR)
    mask = rng.random(n) < config.row_subsample
    n_feat = max(1, int(round(config.feature_subsample * F)))
    feats = np.sort(rng.choice(F, size=n_feat, replace=False)).astype(np.int64)
    rows = np.flatnonzero(mask).astype(np.int64)
    if rows.size == 0:
        return Tree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), np.zeros(1))
    high_pos = np.full(feats.size, -1, dtype=np.int64)
    sel = []
    for fi, f in enumerate(feats):
        if not inputs.low[f]:
            high_pos[fi] = len(sel)
            sel.append(int(np.searchsorted(inputs.high, f)))
    orders = K.subset_orders(inputs.presorted[sel], mask, rows.size) if sel else np.zeros((0, rows.size), np.int64)
    low_feats = feats[inputs.low[feats]]
    parts = K.build_tree(
        inputs.XT, inputs.codes, inputs.bin_vals, inputs.bin_off, grad, hess, rows, orders, feats, high_pos,
        low_feats, inputs.hists, config.max_leaves, config.max_depth, config.min_samples_leaf, config.l2_leaf,
    )
    return Tree(*parts)


def _history_entry(rnd, train_ndcg, valid_ndcg, k):
    return {"round": rnd, f"train_ndcg@{k}": train_ndcg, f"valid_ndcg@{k}": valid_ndcg}


def train(
    train_set: RankingDataset,
    valid_set: RankingDataset,
    config: TrainConfig | None = None,
    threads: int = 1,
    feature_names=None,
) -> GbdtRankerModel:
    """Boost trees on lambdas with early stopping on validation NDCG@k.

    The history starts at round 0 (empty model). Training stops once the
    best validation round is ``early_stopping_rounds`` behind; the model is
    truncated to the best round (first one on ties).
    """
    config = config or TrainConfig()
    if train_set.n_features != valid_set.n_features:
        raise ValueError("train and validation feature arity differ")
    if train_set.query_ids is not None and valid_set.query_ids is not None:
        if set(train_set.query_ids.tolist()) & set(valid_set.query_ids.tolist()):
            raise ValueError("train and validation queries overlap")
    obj = OBJECTIVES[config.objective]
    k = config.eval_k
    runner = _Runner(threads)
    Xt, yt, pt = train_set.X, train_set.y, train_set.ptr
    Xv, yv, pv = valid_set.X, valid_set.y, valid_set.ptr
    inputs = TreeInputs(Xt, config.max_leaves)
    st = np.zeros(Xt.shape[0])
    sv = np.zeros(Xv.shape[0])
    lam = np.zeros(Xt.shape[0])
    hess = np.zeros(Xt.shape[0])
    trees = []
    history = [_history_entry(0, mean_ndcg(st, yt, pt, k, runner=runner), mean_ndcg(sv, yv, pv, k, runner=runner), k)]
    best_round, best_valid = 0, history[0][f"valid_ndcg@{k}"]
    lr = float(config.learning_rate)
    try:
        for rnd in range(1, config.num_rounds + 1):
            runner.run(_lambdas_kernel, pt.size - 1, st, yt, pt, obj, float(config.sigmoid_scale), lam, hess)
            tree = fit_tree(Xt, -lam, hess, config, round_rng(config.seed, rnd), inputs)
            trees.append(tree)
            flat = (tree.feature, tree.threshold, tree.left, tree.right, tree.value)
            root = np.zeros(1, dtype=np.int64)
            runner.run(_predict_kernel, Xt.shape[0], Xt, flat, root, lr, st)
            runner.run(_predict_kernel, Xv.shape[0], Xv, flat, root, lr, sv)
            entry = _history_entry(rnd, mean_ndcg(st, yt, pt, k, runner=runner), mean_ndcg(sv, yv, pv, k, runner=runner), k)
            history.append(entry)
            if entry[f"valid_ndcg@{k}"] > best_valid:
                best_round, best_valid = rnd, entry[f"valid_ndcg@{k}"]
            if rnd - best_round >= config.early_stopping_rounds:
                break
    finally:
        runner.close()
    logger.info(
        "trained %d rounds, best iteration %d (valid ndcg@%d=%.5f)", len(trees), best_round, k, best_valid
    )
    return GbdtRankerModel(
        trees=trees[:best_round],
        learning_rate=lr,
        objective=config.objective,
        n_features=train_set.n_features,
        best_iteration=best_round,
        history=history,
        config=asdict(config),
        feature_names=None if feature_names is None else list(feature_names),
    )
