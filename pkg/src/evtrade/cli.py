"""Command-line entry point: ``evtrade <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io, pipeline
from .config import ExperimentConfig
from .labeling import label_events
from .metrics import CUTOFFS, evaluate_queries
from .ranker import GbdtRankerModel, objective_name, train

logger = logging.getLogger("evtrade")

CONFIG_NAME = "config.json"


def _load_config(args) -> ExperimentConfig:
    path = getattr(args, "config", None)
    if path is None and getattr(args, "in_dir", None):
        candidate = Path(args.in_dir) / CONFIG_NAME
        path = candidate if candidate.exists() else None
    cfg = ExperimentConfig.load(path) if path else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_generate(args) -> None:
    cfg = _load_config(args)
    out = io.ensure_dir(args.out)
    sim = pipeline.simulate(cfg)
    io.write_events_csv(out / "events.csv", sim.events)
    io.write_stations_csv(out / "stations.csv", sim.world.stations)
    io.write_json(out / CONFIG_NAME, cfg.to_dict())
    io.write_json(out / "candidate_stats.json", pipeline.candidate_distribution_stats(sim.events))
    logger.info("wrote %d events to %s", len(sim.events), out)


def cmd_label(args) -> None:
    cfg = _load_config(args)
    d = Path(args.in_dir)
    events = io.read_events_csv(d / "events.csv")
    labels = label_events(events, cfg.topsis, cfg.em, cfg.grades, K=cfg.em_k)
    prep = pipeline.prepare(events, cfg, labels=labels)
    io.write_labels_csv(d / "labels.csv", labels)
    io.write_features_csv(d / "features.csv", prep)
    io.write_json(d / "em_model.json", labels.em_model.to_dict())
    io.write_json(d / "encoder.json", prep.encoder.to_dict())
    logger.info("labelled %d events (%d rows), K=%d", labels.n_events, len(labels.grade), labels.em_model.K)


def cmd_train(args) -> None:
    cfg = _load_config(args)
    tc = cfg.train
    tc.objective = objective_name(args.objective)
    if args.rounds is not None:
        tc.num_rounds = args.rounds
    splits, names = io.read_features_csv(Path(args.in_dir) / "features.csv")
    model = train(splits["train"], splits["valid"], tc, threads=args.threads, feature_names=names)
    model.save(args.model_out)
    logger.info("saved model with %d trees to %s", model.n_trees, args.model_out)


def cmd_evaluate(args) -> None:
    model = GbdtRankerModel.load(args.model)
    splits, _ = io.read_features_csv(Path(args.in_dir) / "features.csv", features=model.feature_names)
    ds = splits[args.split]
    report = evaluate_queries(model.predict(ds.X, args.threads), ds.y, ds.ptr, CUTOFFS)
    report.update(split=args.split, objective=model.objective, best_iteration=model.best_iteration)
    io.write_json(args.report, report)
    print(" ".join(f"{k}={report[k]:.4f}" for k in pipeline.metric_columns(report)))


def cmd_predict(args) -> None:
    model = GbdtRankerModel.load(args.model)
    splits, _ = io.read_features_csv(Path(args.in_dir) / "features.csv", features=model.feature_names)
    rows = []
    for split in pipeline.SPLITS:
        if split not in splits:
            continue
        ds = splits[split]
        scores = model.predict(ds.X, args.threads)
        events = np.repeat(ds.query_ids, np.diff(ds.ptr))
        rows.extend({"event_id": e, "split": split, "score": float(s)} for e, s in zip(events, scores))
    io.write_rows_csv(args.out, rows)


def _sweep_output(args, name, rows) -> None:
    out = io.ensure_dir(args.out)
    io.write_json(out / f"{name}.json", rows)
    io.write_rows_csv(out / f"{name}.csv", rows)
    for r in rows:
        logger.info("%s", {k: (round(v, 4) if isinstance(v, float) else v) for k, v in r.items()})


def cmd_sweep_radius(args) -> None:
    _sweep_output(args, "sweep_radius", pipeline.run_sensitivity_radius(_load_config(args), args.threads))


def cmd_sweep_soc(args) -> None:
    _sweep_output(args, "sweep_soc", pipeline.run_sensitivity_soc(_load_config(args), args.threads))


def cmd_ablate(args) -> None:
    _sweep_output(args, "ablation", pipeline.run_ablation(_load_config(args), args.threads))


def cmd_run(args) -> None:
    cfg = _load_config(args)
    out = io.ensure_dir(args.out)
    res = pipeline.run_experiment(cfg, args.threads)
    res["model"].save(out / "model.json")
    report = {k: res[k] for k in ("candidate_stats", "split_sizes", "em_model", "metrics")}
    report["config"] = cfg.to_dict()
    io.write_json(out / "report.json", report)
    print(" ".join(f"{k}={v:.4f}" for k, v in pipeline.metric_columns(res["metrics"]).items()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evtrade", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "simulate a world and write events.csv / stations.csv")
    p.add_argument("--config", help="ExperimentConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = add("label", cmd_label, "label events and write labels.csv / features.csv")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--config")

    p = add("train", cmd_train, "train a ranker on features.csv")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--config")
    p.add_argument("--objective", default="lambdarank", choices=["lambdarank", "pairwise", "pairwise_logistic"])
    p.add_argument("--rounds", type=int, help="override num_rounds")
    p.add_argument("--model-out", required=True)

    p = add("evaluate", cmd_evaluate, "evaluate a saved model on one split")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="test", choices=list(pipeline.SPLITS))
    p.add_argument("--report", required=True)

    p = add("predict", cmd_predict, "score every row of features.csv")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    for name, func, text in (
        ("sweep-radius", cmd_sweep_radius, "candidate radius sensitivity"),
        ("sweep-soc", cmd_sweep_soc, "provider SoC cutoff sensitivity"),
        ("ablate", cmd_ablate, "label/feature ablation"),
        ("run", cmd_run, "generate, label, train and evaluate in one go"),
    ):
        p = add(name, func, text)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logger.info("%s finished in %.1fs", args.command, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
