"""Steps to full coverage for QL and QL+RISE on 10x10 and 20x20 mazes.

    python3 scripts/maze_benchmark.py --seeds 0-99 --out results/maze

Writes one results directory per size and prints the mean steps with a paired
bootstrap lower bound for each adjacent gap.
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np
from scipy.stats import bootstrap

from rise_explore.config import load_config, parse_seeds
from rise_explore.runner import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def lower_bound(worse, better, seed=0):
    diff = np.asarray(worse) - np.asarray(better)
    return bootstrap((diff,), np.mean, alternative="greater", method="percentile",
                     random_state=np.random.default_rng(seed)).confidence_interval.low


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0-99")
    ap.add_argument("--sizes", default="10,20")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/maze")
    args = ap.parse_args()
    for size in (int(s) for s in args.sizes.split(",")):
        cfg = load_config(ROOT / "configs" / "maze10.yaml")
        cfg = dataclasses.replace(cfg, seeds=parse_seeds(args.seeds), jobs=args.jobs,
                                  out=f"{args.out}/{size}x{size}",
                                  env=dataclasses.replace(cfg.env, size=size))
        res = run_experiment(cfg)
        print(f"{size}x{size}")
        for s in res.summaries.values():
            print(f"  {s.label:14s} {s.formatted}")
        order = sorted(res.summaries.values(), key=lambda s: s.mean)
        if all(s.complete for s in order) and len(order[0].values) > 1:
            for a, b in zip(order, order[1:]):
                print(f"  {a.label} < {b.label}: 95% lower bound on gap {lower_bound(b.values, a.values):.1f}")
        print(f"  wrote {res.out_dir}")


if __name__ == "__main__":
    main()
