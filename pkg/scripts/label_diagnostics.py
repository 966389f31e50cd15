#!/usr/bin/env python3
"""Inspect label construction for one seed: BIC per K, fitted mixture, grade shares by event size."""

import argparse

import numpy as np

from evtrade import pipeline
from evtrade.config import ExperimentConfig
from evtrade.labeling import label_events, select_k
from evtrade.labeling.grades import GradeConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)

    sim = pipeline.simulate(cfg)
    stats = pipeline.candidate_distribution_stats(sim.events)
    print("candidates:", {k: round(v, 3) if isinstance(v, float) else v for k, v in stats.items()})

    labels = label_events(sim.events, cfg.topsis, cfg.em, cfg.grades, K=cfg.em_k)
    _, fits = select_k(labels.topsis_r, cfg.em)
    for k, fit in fits.items():
        print(f"K={k}: BIC={fit.bic():.1f} LL={fit.log_likelihood:.1f} iterations={fit.iterations}")
    m = labels.em_model
    print("selected K:", m.K)
    for k in range(m.K):
        print(f"  pi={m.pi[k]:.4f} alpha={m.alpha[k]:.4f} beta={m.beta[k]:.4f} mean={m.means[k]:.4f}")

    sizes = np.diff(labels.ptr)
    rows_size = np.repeat(sizes, sizes)
    nominal = 100 * (1 - np.array(GradeConfig().kappa))
    print("grade shares (%) for grade >= 3 / >= 2 / >= 1; nominal", np.round(nominal[::-1], 1).tolist())
    for lo, hi in ((1, 4), (4, 10), (10, 20), (20, 10_000), (10, 10_000)):
        sel = (rows_size >= lo) & (rows_size < hi)
        if sel.any():
            y = labels.grade[sel]
            shares = [100 * np.mean(y >= g) for g in (3, 2, 1)]
            print(f"  events with {lo}..{hi - 1} candidates: {np.round(shares, 2).tolist()}")
    disagree = 100 * np.mean(labels.grade != labels.topsis_grade)
    print(f"EM grades differ from TOPSIS-rank grades on {disagree:.2f}% of rows")


if __name__ == "__main__":
    main()
