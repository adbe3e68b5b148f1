"""Cumulative regret of the bandit strategies on nine Bernoulli arms."""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from rise_explore.bandit import boltzmann_probs
from rise_explore.config import load_config, parse_seeds
from rise_explore.runner import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0-99")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/bandit")
    args = ap.parse_args()
    cfg = load_config(ROOT / "configs" / "bandit.yaml")
    cfg = dataclasses.replace(cfg, seeds=parse_seeds(args.seeds), jobs=args.jobs, out=args.out)
    res = run_experiment(cfg)
    base = res.summaries["eps-greedy(0.1)"].mean
    for s in res.summaries.values():
        print(f"{s.label:22s} regret {s.formatted:>16s}  ({s.mean / base:.0%} of eps-greedy(0.1))")
    q = np.asarray(cfg.bandit.probs)
    for tau in (0.01, 0.1, 1.0, 1e6):
        print(f"boltzmann tau={tau:g}: " + " ".join(f"{p:.3f}" for p in boltzmann_probs(q, tau)))


if __name__ == "__main__":
    main()
