"""Experiment configuration: YAML files mapped onto nested dataclasses.

Schema (every section optional except ``kind``)::

    kind: maze            # maze | bandit | estimate | mepc | ccp | rise-pipeline
    seeds: 0-99           # "a-b" inclusive ranges and commas, or a YAML list
    jobs: 1
    out: results/maze
    plot: true
    env:       {size, n_portals, loop_prob, discount, episode_cap}
    agent:     {step_size, epsilon, discount, max_total_steps}
    intrinsic: {alpha, lambda0, kappa, zeta, k, embed_dim, embedding}
    variants:  [{name, reward, alpha}]
    bandit:    {probs, steps, record_every, strategies: [{name, epsilon, decay, c, tau}]}
    estimate:  {distribution, sizes, dim, k, alpha, search_k}
    mepc:      {mdp, alpha, sigma, epsilon, iterations, every}
    ccp:       {dist, tol, runs}
    pipeline:  {phase1_steps, n_subsets, k_max}
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bandit import StrategyConfig
from .errors import ValidationError
from .intrinsic import GENERATOR_NAMES

KINDS = ("maze", "bandit", "estimate", "mepc", "ccp", "rise-pipeline")
OUT_ENV_VAR = "RISE_EXPLORE_OUT"


def parse_seeds(spec) -> tuple[int, ...]:
    """'0-4,9' -> (0, 1, 2, 3, 4, 9); lists and single ints pass through."""
    if isinstance(spec, int):
        seeds = [spec]
    elif isinstance(spec, (list, tuple)):
        seeds = [int(s) for s in spec]
    else:
        seeds = []
        for part in str(spec).split(","):
            part = part.strip()
            if not part:
                continue
            try:
                if "-" in part:
                    lo, hi = part.split("-", 1)
                    seeds.extend(range(int(lo), int(hi) + 1))
                else:
                    seeds.append(int(part))
            except ValueError:
                raise ValidationError(f"bad seed specification {part!r}") from None
    if not seeds:
        raise ValidationError("seed list is empty")
    if any(s < 0 for s in seeds):
        raise ValidationError("seeds must be non-negative")
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")
    return tuple(seeds)


@dataclass(frozen=True)
class EnvConfig:
    size: int = 10
    n_portals: int = 1
    loop_prob: float = 0.1
    discount: float = 0.99
    episode_cap: int | None = None  # default 10 M^2

    @property
    def cap(self) -> int:
        return self.episode_cap or 10 * self.size ** 2


@dataclass(frozen=True)
class AgentConfig:
    step_size: float = 0.2
    epsilon: float = 0.001
    discount: float = 0.99
    max_total_steps: int = 1_000_000


@dataclass(frozen=True)
class IntrinsicSection:
    alpha: float = 0.1
    lambda0: float = 0.25
    kappa: float = 1e-5
    zeta: float = 0.0
    k: int = 1
    embed_dim: int = 16
    embedding: str = "one_hot"


@dataclass(frozen=True)
class Variant:
    name: str
    reward: str = "none"
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.reward not in GENERATOR_NAMES:
            raise ValidationError(f"unknown intrinsic reward {self.reward!r}; valid: {', '.join(GENERATOR_NAMES)}")


def default_variants() -> tuple[Variant, ...]:
    return (Variant("QL"),
            Variant("QL+RISE(0.1)", "rise", 0.1),
            Variant("QL+RISE(0.5)", "rise", 0.5),
            Variant("QL+RISE(0.9)", "rise", 0.9))


@dataclass(frozen=True)
class BanditSection:
    probs: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    steps: int = 10_000
    record_every: int = 1
    strategies: tuple[StrategyConfig, ...] = (
        StrategyConfig("epsilon_greedy", epsilon=0.1),
        StrategyConfig("ucb", c=1.0),
        StrategyConfig("thompson"),
    )


@dataclass(frozen=True)
class EstimateSection:
    distribution: str = "uniform"  # uniform on [0,1]^dim or standard gaussian
    sizes: tuple[int, ...] = (500, 1000, 2000, 5000)
    dim: int = 2
    k: int = 3
    alpha: float = 0.5
    search_k: bool = False


@dataclass(frozen=True)
class MepcSection:
    mdp: str | None = None  # MDP text file; None means the 3-state chain
    alpha: float = 0.5
    sigma: float = 0.01
    epsilon: float = 0.05
    iterations: int | None = None
    every: int | None = None


@dataclass(frozen=True)
class CcpSection:
    dist: str | None = None  # whitespace/comma separated probabilities
    n: int = 40  # uniform size when no file is given
    tol: float = 1e-4
    runs: int = 100_000


@dataclass(frozen=True)
class PipelineSection:
    phase1_steps: int = 10_000
    n_subsets: int = 8
    k_max: int = 15


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple[int, ...] = (0,)
    jobs: int = 1
    out: str | None = None
    plot: bool = True
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    intrinsic: IntrinsicSection = field(default_factory=IntrinsicSection)
    variants: tuple[Variant, ...] = field(default_factory=default_variants)
    bandit: BanditSection = field(default_factory=BanditSection)
    estimate: EstimateSection = field(default_factory=EstimateSection)
    mepc: MepcSection = field(default_factory=MepcSection)
    ccp: CcpSection = field(default_factory=CcpSection)
    pipeline: PipelineSection = field(default_factory=PipelineSection)

    def __post_init__(self) -> None:
        validate(self)

    def output_dir(self) -> Path:
        """--out / config value, then $RISE_EXPLORE_OUT, then results/<kind>."""
        if self.out:
            return Path(self.out)
        env = os.environ.get(OUT_ENV_VAR)
        return Path(env) / self.kind if env else Path("results") / self.kind


def validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in KINDS:
        raise ValidationError(f"unknown experiment kind {cfg.kind!r}; valid: {', '.join(KINDS)}")
    parse_seeds(list(cfg.seeds))
    if cfg.jobs < 1:
        raise ValidationError("jobs must be at least 1")
    if cfg.env.size < 2:
        raise ValidationError("maze size must be at least 2")
    if not 0.0 <= cfg.agent.epsilon <= 1.0:
        raise ValidationError("agent epsilon must lie in [0, 1]")
    if cfg.agent.max_total_steps < 1:
        raise ValidationError("max_total_steps must be positive")
    if not cfg.variants:
        raise ValidationError("need at least one variant")
    if len({v.name for v in cfg.variants}) != len(cfg.variants):
        raise ValidationError("variant names must be distinct")
    if cfg.bandit.steps < 1 or cfg.bandit.record_every < 1 or not cfg.bandit.strategies:
        raise ValidationError("bandit needs steps >= 1, record_every >= 1 and a strategy")
    if cfg.estimate.distribution not in ("uniform", "gaussian"):
        raise ValidationError("estimate distribution must be 'uniform' or 'gaussian'")
    if not cfg.estimate.sizes or min(cfg.estimate.sizes) <= cfg.estimate.k:
        raise ValidationError("estimate sizes must exceed k")
    for path in (cfg.mepc.mdp, cfg.ccp.dist):
        if path is not None and not Path(path).is_file():
            raise ValidationError(f"file not found: {path}")
    if cfg.ccp.tol <= 0 or cfg.ccp.runs < 1:
        raise ValidationError("ccp needs tol > 0 and runs >= 1")
    if cfg.pipeline.phase1_steps < 1:
        raise ValidationError("phase1_steps must be positive")


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"section {where!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown key(s) in {where!r}: {', '.join(sorted(unknown))}")
    kwargs = dict(data)
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad values in {where!r}: {exc}") from None


SECTIONS = {"env": EnvConfig, "agent": AgentConfig, "intrinsic": IntrinsicSection,
            "estimate": EstimateSection, "mepc": MepcSection, "ccp": CcpSection,
            "pipeline": PipelineSection}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict) or "kind" not in data:
        raise ValidationError("config must be a mapping with a 'kind' key")
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    kwargs: dict = {"kind": data["kind"]}
    if "seeds" in data:
        kwargs["seeds"] = parse_seeds(data["seeds"])
    for key in ("jobs", "out", "plot"):
        if key in data:
            kwargs[key] = data[key]
    for key, cls in SECTIONS.items():
        if key in data:
            kwargs[key] = _build(cls, data[key], key)
    if "variants" in data:
        kwargs["variants"] = tuple(_build(Variant, v, "variants") for v in data["variants"] or [])
    if "bandit" in data:
        section = dict(data["bandit"] or {})
        strategies = section.pop("strategies", None)
        bandit = _build(BanditSection, section, "bandit")
        if strategies is not None:
            strat = tuple(_build(StrategyConfig, s, "bandit.strategies") for s in strategies)
            bandit = dataclasses.replace(bandit, strategies=strat)
        kwargs["bandit"] = bandit
    return ExperimentConfig(**kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)
