"""Seeded multi-run experiments: execution, CSV output and plots.

Every seed is an independent task that owns its environment, agent and
random streams, so serial and parallel execution write identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import CoverageResult, QLearningAgent, steps_to_coverage
from .bandit import BernoulliBandit, run_bandit
from .config import ExperimentConfig, Variant
from .embedding import state_embeddings
from .entropy import (gaussian_renyi_entropy, gaussian_shannon_entropy, knn_renyi_estimate,
                      knn_shannon_estimate, search_k)
from .envs import TabularEnv, build_maze, chain_mdp, generate_maze
from .errors import ValidationError
from .intrinsic import IntrinsicConfig, make_generator
from .mdp import TabularMdp, load_mdp
from .mepc import MepcConfig, ccp_expected_time, ccp_monte_carlo, run_mepc
from .plotting import Series, emit_plot
from .rng import make_rng

# stream ids appended to the seed when deriving per-task generators
STREAM_AGENT = 1
STREAM_PHASE1 = 2
STREAM_ESTIMATE = 3
STREAM_CCP = 4

MAZE_COLUMNS = ("variant", "seed", "episode", "steps", "extrinsic_return", "intrinsic_sum",
                "coverage_steps")
SUMMARY_COLUMNS = ("label", "n", "mean", "std", "formatted", "complete", "errors")


# ---------------------------------------------------------------------------
# summaries


def format_quantity(x: float) -> str:
    """3 significant-ish digits with a k/M suffix: 5240 -> '5.24k'."""
    if not math.isfinite(x):
        return str(x)
    for scale, suffix in ((1e9, "G"), (1e6, "M"), (1e3, "k")):
        if abs(x) >= scale:
            return f"{x / scale:.2f}{suffix}"
    return f"{x:.2f}"


def format_mean_std(mean: float, std: float) -> str:
    return f"{format_quantity(mean)}±{format_quantity(std)}"


def mean_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std())


@dataclass
class RunSummary:
    label: str
    seeds: tuple[int, ...]
    values: np.ndarray  # one metric per successful seed, in seed order
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return mean_std(self.values)[0] if len(self.values) else float("nan")

    @property
    def std(self) -> float:
        return mean_std(self.values)[1] if len(self.values) else float("nan")

    @property
    def complete(self) -> bool:
        return not self.errors

    @property
    def formatted(self) -> str:
        return format_mean_std(self.mean, self.std)

    def row(self) -> tuple:
        errs = "; ".join(f"{s}: {m}" for s, m in sorted(self.errors.items()))
        return (self.label, len(self.values), repr(self.mean), repr(self.std), self.formatted,
                int(self.complete), errs)


@dataclass
class ExperimentResult:
    kind: str
    summaries: dict[str, RunSummary]
    out_dir: Path
    raw_path: Path
    summary_path: Path
    plot_path: Path | None = None
    extra: dict = field(default_factory=dict)

    @property
    def summary(self) -> RunSummary:
        if len(self.summaries) != 1:
            raise ValidationError("experiment has several summaries; index .summaries")
        return next(iter(self.summaries.values()))


# ---------------------------------------------------------------------------
# task execution


def _safe_call(task):
    fn, args = task
    try:
        return True, fn(*args)
    except Exception as exc:  # recorded per seed, the sweep carries on
        return False, f"{type(exc).__name__}: {exc}"


def execute(tasks, jobs: int = 1) -> list:
    """Run (fn, args) tasks, returning (ok, value) pairs in task order."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [_safe_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_safe_call, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_summary(path: Path, summaries) -> None:
    _write_csv(path, SUMMARY_COLUMNS, [s.row() for s in summaries])


# ---------------------------------------------------------------------------
# maze coverage benchmark


def intrinsic_for(cfg: ExperimentConfig, variant: Variant | None = None, k: int | None = None) -> IntrinsicConfig:
    sec = cfg.intrinsic
    alpha = sec.alpha if variant is None or variant.alpha is None else variant.alpha
    return IntrinsicConfig(alpha=alpha, lambda0=sec.lambda0, kappa=sec.kappa, zeta=sec.zeta,
                           k=sec.k if k is None else k, embed_dim=sec.embed_dim)


def maze_for_seed(cfg: ExperimentConfig, seed: int) -> TabularMdp:
    e = cfg.env
    return build_maze(generate_maze(e.size, seed, e.n_portals, e.loop_prob), e.discount)


def train_with_reward(cfg: ExperimentConfig, mdp: TabularMdp, reward: str, icfg: IntrinsicConfig,
                      seed: int) -> CoverageResult:
    """Q-learning (plus the named intrinsic reward) until full coverage."""
    a = cfg.agent
    agent = QLearningAgent.for_mdp(mdp, step_size=a.step_size, epsilon=a.epsilon,
                                   discount=a.discount, intrinsic=icfg)
    gen = None
    if reward != "none":
        gen = make_generator(reward, mdp.n_states, icfg, cfg.intrinsic.embedding, seed, mdp.cells)
    return steps_to_coverage(mdp, agent, make_rng(seed, STREAM_AGENT), gen,
                             episode_cap=cfg.env.cap, max_total_steps=a.max_total_steps)


def maze_seed_task(cfg: ExperimentConfig, variant: Variant, seed: int) -> CoverageResult:
    mdp = maze_for_seed(cfg, seed)
    return train_with_reward(cfg, mdp, variant.reward, intrinsic_for(cfg, variant), seed)


def _episode_rows(label: str, seed: int, res: CoverageResult):
    for i, st in enumerate(res.episode_stats):
        cov = "" if st.coverage_steps is None else st.coverage_steps
        yield (label, seed, i, st.steps, repr(st.extrinsic_return), repr(st.intrinsic_sum), cov)


def coverage_metric_from_rows(rows) -> float:
    """Steps to coverage for one (variant, seed) from its raw CSV rows: the
    first non-blank coverage_steps, else the total step count (censored)."""
    total = 0
    for r in rows:
        if r["coverage_steps"] != "":
            return float(r["coverage_steps"])
        total += int(r["steps"])
    return float(total)


def _coverage_series(label: str, results: list[CoverageResult], n_states_by_seed, grid) -> Series:
    curves = [np.searchsorted(np.asarray(r.discoveries), grid, side="right") / n
              for r, n in zip(results, n_states_by_seed)]
    return Series.from_runs(label, grid, curves)


def run_maze(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    tasks = [(maze_seed_task, (cfg, v, s)) for v in cfg.variants for s in cfg.seeds]
    results = execute(tasks, cfg.jobs)
    rows, summaries, ok_results = [], {}, {}
    it = iter(results)
    for v in cfg.variants:
        vals, errs, oks = [], {}, []
        for s in cfg.seeds:
            ok, res = next(it)
            if not ok:
                errs[s] = res
                continue
            rows.extend(_episode_rows(v.name, s, res))
            vals.append(float(res.steps))
            oks.append((s, res))
        summaries[v.name] = RunSummary(v.name, cfg.seeds, np.array(vals), errs)
        ok_results[v.name] = oks
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, MAZE_COLUMNS, rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot and any(ok_results.values()):
        top = max(r.steps for oks in ok_results.values() for _, r in oks)
        grid = np.unique(np.linspace(0, top, 200).astype(int))
        sizes = {s: len(maze_for_seed(cfg, s).cells) for s in cfg.seeds}
        series = [_coverage_series(name, [r for _, r in oks], [sizes[s] for s, _ in oks], grid)
                  for name, oks in ok_results.items() if oks]
        plot = emit_plot(series, out / "plot.svg", "environment steps", "fraction of states visited",
                         f"{cfg.env.size}x{cfg.env.size} maze coverage")
    return ExperimentResult("maze", summaries, out, raw, summ, plot, {"results": ok_results})


# ---------------------------------------------------------------------------
# two-phase RISE pipeline


def phase1_samples(cfg: ExperimentConfig, mdp: TabularMdp, seed: int) -> np.ndarray:
    """Embeddings of the states visited by a uniform-random policy."""
    n = cfg.pipeline.phase1_steps
    need = cfg.pipeline.n_subsets * (cfg.pipeline.k_max + 1)
    if n < need:
        raise ValidationError(f"phase 1 needs at least {need} steps, got {n}")
    rng = make_rng(seed, STREAM_PHASE1)
    env = TabularEnv(mdp)
    actions = rng.integers(mdp.n_actions, size=n).tolist()
    visited = np.empty(n, dtype=np.int64)
    s = env.reset(rng)
    for i, a in enumerate(actions):
        if env.done:
            s = env.reset(rng)
        s, _, _ = env.step(a, rng)
        visited[i] = s
    emb = state_embeddings(mdp.n_states, cfg.intrinsic.embedding, cfg.intrinsic.embed_dim,
                           seed, mdp.cells)
    return emb[visited]


def phase1_search_k(cfg: ExperimentConfig, mdp: TabularMdp, seed: int) -> int:
    p = cfg.pipeline
    samples = phase1_samples(cfg, mdp, seed)
    res = search_k(samples, p.n_subsets, p.k_max, cfg.intrinsic.alpha, make_rng(seed, STREAM_PHASE1, 1))
    return res.k


def phase2_train(cfg: ExperimentConfig, mdp: TabularMdp, k: int, seed: int) -> CoverageResult:
    return train_with_reward(cfg, mdp, "rise", intrinsic_for(cfg, k=k), seed)


def pipeline_seed_task(cfg: ExperimentConfig, seed: int) -> tuple[int, CoverageResult]:
    mdp = maze_for_seed(cfg, seed)
    k = phase1_search_k(cfg, mdp, seed)
    return k, phase2_train(cfg, mdp, k, seed)


def run_pipeline(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    results = execute([(pipeline_seed_task, (cfg, s)) for s in cfg.seeds], cfg.jobs)
    label = f"QL+RISE({cfg.intrinsic.alpha:g})"
    rows, vals, errs, oks, ks = [], [], {}, [], {}
    for s, (ok, res) in zip(cfg.seeds, results):
        if not ok:
            errs[s] = res
            continue
        k, cov = res
        ks[s] = k
        rows.append((s, k, cov.steps, int(cov.completed), cov.episodes))
        vals.append(float(cov.steps))
        oks.append((s, cov))
    summaries = {label: RunSummary(label, cfg.seeds, np.array(vals), errs)}
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, ("seed", "k", "steps_to_coverage", "completed", "episodes"), rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot and oks:
        top = max(r.steps for _, r in oks)
        grid = np.unique(np.linspace(0, top, 200).astype(int))
        sizes = [len(maze_for_seed(cfg, s).cells) for s, _ in oks]
        plot = emit_plot([_coverage_series(label, [r for _, r in oks], sizes, grid)], out / "plot.svg",
                         "environment steps", "fraction of states visited", "two-phase RISE")
    return ExperimentResult("rise-pipeline", summaries, out, raw, summ, plot, {"k": ks, "results": oks})


# ---------------------------------------------------------------------------
# bandits


def bandit_seed_task(cfg: ExperimentConfig, strategy_index: int, seed: int):
    env = BernoulliBandit(cfg.bandit.probs)
    return run_bandit(cfg.bandit.strategies[strategy_index], env, cfg.bandit.steps, seed)


def run_bandits(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    b = cfg.bandit
    tasks = [(bandit_seed_task, (cfg, i, s)) for i in range(len(b.strategies)) for s in cfg.seeds]
    results = execute(tasks, cfg.jobs)
    keep = np.unique(np.r_[np.arange(b.record_every - 1, b.steps, b.record_every), b.steps - 1])
    rows, summaries, curves = [], {}, {}
    it = iter(results)
    for strat in b.strategies:
        vals, errs, regrets = [], {}, []
        for s in cfg.seeds:
            ok, hist = next(it)
            if not ok:
                errs[s] = hist
                continue
            cum = hist.cumulative_reward
            for t in keep:
                rows.append((strat.label, s, int(t) + 1, int(hist.arms[t]), repr(float(hist.rewards[t])),
                             repr(float(cum[t])), repr(float(hist.regret[t]))))
            vals.append(float(hist.regret[-1]))
            regrets.append(hist.regret[keep])
        summaries[strat.label] = RunSummary(strat.label, cfg.seeds, np.array(vals), errs)
        curves[strat.label] = regrets
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, ("strategy", "seed", "t", "arm", "reward", "cumulative_reward", "cumulative_regret"), rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot and any(curves.values()):
        series = [Series.from_runs(name, keep + 1, c) for name, c in curves.items() if c]
        plot = emit_plot(series, out / "plot.svg", "pulls", "cumulative regret", "Bernoulli bandit")
    return ExperimentResult("bandit", summaries, out, raw, summ, plot)


# ---------------------------------------------------------------------------
# estimator validation


def estimate_seed_task(cfg: ExperimentConfig, seed: int) -> list[tuple]:
    e = cfg.estimate
    rng = make_rng(seed, STREAM_ESTIMATE)
    n_max = max(e.sizes)
    if e.distribution == "uniform":
        pts = rng.random((n_max, e.dim))
        ref_s = ref_r = 0.0
    else:
        pts = rng.standard_normal((n_max, e.dim))
        ref_s, ref_r = gaussian_shannon_entropy(e.dim), gaussian_renyi_entropy(e.dim, e.alpha)
    k_r = e.k
    if e.search_k:
        k_r = search_k(pts, rng=make_rng(seed, STREAM_ESTIMATE, 1), alpha=e.alpha).k
    out = []
    for n in sorted(e.sizes):
        x = pts[:n]
        h_s = knn_shannon_estimate(x, e.k)
        h_r = knn_renyi_estimate(x, e.alpha, k_r)
        out.append(("shannon", n, e.k, h_s, ref_s))
        out.append((f"renyi({e.alpha:g})", n, k_r, h_r, ref_r))
    return out


def run_estimate(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    results = execute([(estimate_seed_task, (cfg, s)) for s in cfg.seeds], cfg.jobs)
    n_max = max(cfg.estimate.sizes)
    rows, per_label, errs, curves = [], {}, {}, {}
    for s, (ok, res) in zip(cfg.seeds, results):
        if not ok:
            errs[s] = res
            continue
        for label, n, k, h, ref in res:
            rows.append((s, label, n, k, repr(h), repr(ref), repr(h - ref)))
            curves.setdefault(label, {}).setdefault(s, []).append(h)
            if n == n_max:
                per_label.setdefault(label, []).append(h)
    labels = list(per_label) or ["shannon"]
    summaries = {lab: RunSummary(lab, cfg.seeds, np.array(per_label.get(lab, [])), dict(errs)) for lab in labels}
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, ("seed", "estimator", "n", "k", "estimate", "analytic", "error"), rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot and curves:
        x = np.array(sorted(cfg.estimate.sizes))
        series = [Series.from_runs(lab, x, list(by_seed.values())) for lab, by_seed in curves.items()]
        plot = emit_plot(series, out / "plot.svg", "sample size", "entropy estimate (nats)",
                         f"{cfg.estimate.distribution} in {cfg.estimate.dim}D")
    return ExperimentResult("estimate", summaries, out, raw, summ, plot)


# ---------------------------------------------------------------------------
# MEPC and the coupon collector


def run_mepc_experiment(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    m = cfg.mepc
    mdp = load_mdp(m.mdp) if m.mdp else chain_mdp(3, 0.9)
    mc = MepcConfig.from_bound(m.alpha, m.sigma, m.epsilon, m.iterations)
    res = run_mepc(mdp, mc)
    every = m.every or max(1, mc.iterations // 100)
    marks, occ = res.occupancy_trace(every)
    rows = [(int(t), repr(float(res.entropy_trace[t])), *(repr(float(v)) for v in d))
            for t, d in zip(marks, occ)]
    header = ("iteration", "entropy", *(f"d{i}" for i in range(mdp.n_states)))
    label = "MEPC"
    summaries = {label: RunSummary(label, cfg.seeds[:1], np.array([res.entropy_trace[-1]]))}
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, header, rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot:
        tr = res.entropy_trace[marks]
        plot = emit_plot([Series(label, marks, tr, np.zeros_like(tr))], out / "plot.svg",
                         "iteration", "smoothed Renyi entropy", "MEPC")
    return ExperimentResult("mepc", summaries, out, raw, summ, plot,
                            {"result": res, "config": mc, "header": header, "rows": rows})


def load_distribution(path: str | Path) -> np.ndarray:
    text = Path(path).read_text().replace(",", " ").split()
    try:
        p = np.array([float(x) for x in text])
    except ValueError:
        raise ValidationError(f"{path}: expected numbers") from None
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{path}: not a probability vector")
    return p


def ccp_seed_task(p: np.ndarray, runs: int, seed: int) -> np.ndarray:
    return ccp_monte_carlo(p, runs, make_rng(seed, STREAM_CCP))


def run_ccp(cfg: ExperimentConfig, out: Path) -> ExperimentResult:
    c = cfg.ccp
    p = load_distribution(c.dist) if c.dist else np.full(c.n, 1.0 / c.n)
    expected = ccp_expected_time(p, c.tol)
    results = execute([(ccp_seed_task, (p, c.runs, s)) for s in cfg.seeds], cfg.jobs)
    rows, vals, errs = [], [], {}
    for s, (ok, draws) in zip(cfg.seeds, results):
        if not ok:
            errs[s] = draws
            continue
        m = float(draws.mean())
        rows.append((s, c.runs, repr(m), repr(float(draws.std())), repr(expected), repr(m / expected - 1.0)))
        vals.append(m)
    label = "monte_carlo"
    summaries = {label: RunSummary(label, cfg.seeds, np.array(vals), errs)}
    raw, summ = out / "raw.csv", out / "summary.csv"
    _write_csv(raw, ("seed", "runs", "mc_mean", "mc_std", "expected", "relative_gap"), rows)
    _write_summary(summ, summaries.values())
    plot = None
    if cfg.plot:
        t = np.linspace(0.0, 3.0 * expected, 200)
        surv = 1.0 - np.prod(-np.expm1(-np.outer(t, p)), axis=1)
        plot = emit_plot([Series("P(T > t)", t, surv, np.zeros_like(t))], out / "plot.svg",
                         "time", "probability not yet collected", "coupon collector")
    return ExperimentResult("ccp", summaries, out, raw, summ, plot,
                            {"expected": expected, "mc_mean": float(np.mean(vals)) if vals else float("nan")})


RUNNERS = {"maze": run_maze, "rise-pipeline": run_pipeline, "bandit": run_bandits,
           "estimate": run_estimate, "mepc": run_mepc_experiment, "ccp": run_ccp}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed of ``cfg`` and write raw.csv, summary.csv and plot.svg."""
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.kind](cfg, out)


def rise_tabular_pipeline(cfg: ExperimentConfig) -> ExperimentResult:
    """Phase 1 (random rollouts + k search) then Phase 2 (Q-learning + RISE)."""
    if cfg.kind != "rise-pipeline":
        cfg = dataclasses.replace(cfg, kind="rise-pipeline")
    return run_experiment(cfg)
