"""MEPC on the 3-state chain: entropy trace against the best mixture."""

import argparse
import itertools

import numpy as np
from scipy.optimize import minimize

from rise_explore.entropy import SmoothedEntropyParams, smoothed_renyi
from rise_explore.envs import chain_mdp
from rise_explore.mdp import TabularPolicy, state_occupancy
from rise_explore.mepc import MepcConfig, run_mepc


def best_mixture(mdp, params):
    verts = np.array([state_occupancy(mdp, TabularPolicy.deterministic(a, mdp.n_actions)).probs
                      for a in itertools.product(range(mdp.n_actions), repeat=mdp.n_states)])
    best = -np.inf
    for w0 in np.random.default_rng(0).dirichlet(np.ones(len(verts)), 10):
        r = minimize(lambda w: -smoothed_renyi(np.clip(w, 0, None) / np.clip(w, 0, None).sum() @ verts, params),
                     w0, method="SLSQP", bounds=[(0, 1)] * len(verts),
                     constraints=({"type": "eq", "fun": lambda w: w.sum() - 1},))
        best = max(best, -r.fun)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--iterations", type=int, default=None, help="override the bound")
    args = ap.parse_args()
    mdp = chain_mdp(3, 0.9)
    cfg = MepcConfig.from_bound(args.alpha, args.sigma, args.epsilon, args.iterations)
    print(f"T={cfg.iterations} eta={cfg.eta:.3g}")
    res = run_mepc(mdp, cfg)
    marks, occ = res.occupancy_trace(max(1, cfg.iterations // 10))
    for t, d in zip(marks, occ):
        print(f"t={t:>8d}  H={res.entropy_trace[t]:.6f}  d={np.round(d, 4)}")
    print(f"best mixture H={best_mixture(mdp, SmoothedEntropyParams(args.alpha, args.sigma)):.6f}")


if __name__ == "__main__":
    main()
