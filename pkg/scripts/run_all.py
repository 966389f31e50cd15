#!/usr/bin/env python3
"""Run the desk-scale experiments and write JSON/CSV reports.

Usage:
    python3 scripts/run_all.py --out results
    python3 scripts/run_all.py --only ablation --threads 4
"""

import argparse
import logging
import time
from pathlib import Path

from evtrade import io, pipeline
from evtrade.config import ExperimentConfig

STAGES = ("main", "radius", "soc", "ablation")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="ExperimentConfig JSON (defaults if omitted)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", choices=STAGES, action="append", help="repeatable; default runs every stage")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = io.ensure_dir(args.out)
    io.write_json(out / "config.json", cfg.to_dict())
    stages = args.only or STAGES

    t0 = time.perf_counter()
    sim = pipeline.simulate(cfg)
    timings = {"simulate": time.perf_counter() - t0}

    if "main" in stages:
        t = time.perf_counter()
        res = pipeline.run_experiment(cfg, args.threads, sim=sim)
        res["model"].save(out / "model.json")
        report = {k: res[k] for k in ("candidate_stats", "split_sizes", "em_model", "metrics")}
        report["history"] = res["model"].history
        io.write_json(out / "main.json", report)
        timings["main"] = time.perf_counter() - t
        print("main:", {k: round(v, 4) for k, v in pipeline.metric_columns(res["metrics"]).items()})

    runners = {
        "radius": pipeline.run_sensitivity_radius,
        "soc": pipeline.run_sensitivity_soc,
        "ablation": pipeline.run_ablation,
    }
    for name, fn in runners.items():
        if name not in stages:
            continue
        t = time.perf_counter()
        rows = fn(cfg, args.threads, sim=sim)
        io.write_json(out / f"{name}.json", rows)
        io.write_rows_csv(out / f"{name}.csv", rows)
        timings[name] = time.perf_counter() - t
        for r in rows:
            print(name, {k: (round(v, 4) if isinstance(v, float) else v) for k, v in r.items()})

    io.write_json(out / "timings.json", timings)
    print("timings (s):", {k: round(v, 1) for k, v in timings.items()})


if __name__ == "__main__":
    main()
