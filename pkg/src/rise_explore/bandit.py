"""K-armed bandits and the classical exploration strategies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UnsupportedError, ValidationError
from .rng import as_rng

STRATEGIES = ("epsilon_greedy", "ucb", "thompson", "boltzmann")
CSV_COLUMNS = ("seed", "t", "arm", "reward", "cumulative_reward", "cumulative_regret")


@dataclass(frozen=True)
class BernoulliBandit:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        p = tuple(float(x) for x in self.probs)
        if len(p) < 1:
            raise ValidationError("need at least one arm")
        if any(not 0.0 <= x <= 1.0 for x in p):
            raise ValidationError("Bernoulli probabilities must lie in [0, 1]")
        object.__setattr__(self, "probs", p)

    @property
    def n_arms(self) -> int:
        return len(self.probs)

    @property
    def means(self) -> np.ndarray:
        return np.array(self.probs)

    binary = True

    def pull(self, arm: int, rng: np.random.Generator) -> float:
        return 1.0 if rng.random() < self.probs[arm] else 0.0


@dataclass(frozen=True)
class GaussianBandit:
    mu: tuple[float, ...]
    sigma: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.mu) < 1 or len(self.mu) != len(self.sigma):
            raise ValidationError("mu and sigma need equal, positive length")
        if any(s < 0 for s in self.sigma):
            raise ValidationError("sigma must be non-negative")
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        object.__setattr__(self, "sigma", tuple(float(x) for x in self.sigma))

    @property
    def n_arms(self) -> int:
        return len(self.mu)

    @property
    def means(self) -> np.ndarray:
        return np.array(self.mu)

    binary = False

    def pull(self, arm: int, rng: np.random.Generator) -> float:
        return self.mu[arm] + self.sigma[arm] * float(rng.standard_normal())


@dataclass
class BanditState:
    n_arms: int
    q: np.ndarray = field(init=False)
    count: np.ndarray = field(init=False)
    t: int = 0
    total: float = 0.0
    alpha: np.ndarray = field(init=False)
    beta: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.n_arms < 1:
            raise ValidationError("need at least one arm")
        self.q = np.zeros(self.n_arms)
        self.count = np.zeros(self.n_arms, dtype=np.int64)
        self.alpha = np.ones(self.n_arms)
        self.beta = np.ones(self.n_arms)

    def update(self, arm: int, reward: float) -> None:
        """Q(k) = (Q(k) count(k) + v) / (count(k) + 1)."""
        c = self.count[arm]
        self.q[arm] = (self.q[arm] * c + reward) / (c + 1)
        self.count[arm] = c + 1
        self.t += 1
        self.total += reward


def epsilon_greedy_probs(q, epsilon: float) -> np.ndarray:
    """1 - eps + eps/K on the greedy arm, eps/K elsewhere."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError("epsilon must lie in [0, 1]")
    q = np.asarray(q, dtype=float)
    p = np.full(len(q), epsilon / len(q))
    p[int(np.argmax(q))] += 1.0 - epsilon
    return p


def select_epsilon_greedy(state: BanditState, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(state.n_arms))
    return int(np.argmax(state.q))


def ucb_indices(state: BanditState, c: float) -> np.ndarray:
    """Q(i) + c sqrt(ln t / N(i)), with +inf for unpulled arms."""
    if c <= 0:
        raise ValidationError("UCB coefficient must be positive")
    idx = np.full(state.n_arms, np.inf)
    pulled = state.count > 0
    if state.t > 0:
        idx[pulled] = state.q[pulled] + c * np.sqrt(math.log(state.t) / state.count[pulled])
    return idx


def select_ucb(state: BanditState, c: float) -> int:
    return int(np.argmax(ucb_indices(state, c)))


def sample_beta(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Beta draws as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b)."""
    x = rng.standard_gamma(a)
    y = rng.standard_gamma(b)
    return x / (x + y)


def thompson_step(state: BanditState, env, rng: np.random.Generator) -> tuple[int, float]:
    if not getattr(env, "binary", False):
        raise UnsupportedError("Thompson sampling here needs Bernoulli rewards")
    arm = int(np.argmax(sample_beta(state.alpha, state.beta, rng)))
    r = env.pull(arm, rng)
    state.alpha[arm] += r
    state.beta[arm] += 1.0 - r
    state.update(arm, r)
    return arm, r


def boltzmann_probs(q, tau: float) -> np.ndarray:
    """exp(Q/tau) / sum exp(Q/tau), shifted by the max for safety."""
    if not tau > 0:
        raise ValidationError("temperature must be positive")
    z = np.asarray(q, dtype=float) / tau
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    epsilon: float = 0.1
    decay: bool = False  # epsilon_t = 1/sqrt(t)
    c: float = 1.0
    tau: float = 0.1

    def __post_init__(self) -> None:
        if self.name not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.name!r}; valid: {', '.join(STRATEGIES)}")

    @property
    def label(self) -> str:
        if self.name == "epsilon_greedy":
            return "eps-greedy(1/sqrt(t))" if self.decay else f"eps-greedy({self.epsilon:g})"
        if self.name == "ucb":
            return f"UCB(c={self.c:g})"
        if self.name == "boltzmann":
            return f"Boltzmann(tau={self.tau:g})"
        return "Thompson"


@dataclass(frozen=True)
class BanditHistory:
    seed: int
    arms: np.ndarray
    rewards: np.ndarray
    regret: np.ndarray  # cumulative pseudo-regret after each step
    state: BanditState

    @property
    def cumulative_reward(self) -> np.ndarray:
        return np.cumsum(self.rewards)

    def rows(self):
        cum = self.cumulative_reward
        for t in range(len(self.arms)):
            yield (self.seed, t + 1, int(self.arms[t]), float(self.rewards[t]), float(cum[t]),
                   float(self.regret[t]))


def run_bandit(strategy: StrategyConfig, env, steps: int, seed: int = 0) -> BanditHistory:
    """Play ``steps`` rounds. Regret is the pseudo-regret sum of (mu* - mu_arm)."""
    if steps < 1:
        raise ValidationError("need at least one step")
    rng = as_rng(seed)
    state = BanditState(env.n_arms)
    means = env.means
    gaps = means.max() - means
    arms = np.empty(steps, dtype=np.int64)
    rewards = np.empty(steps)
    for i in range(steps):
        name = strategy.name
        if name == "thompson":
            arm, r = thompson_step(state, env, rng)
        else:
            if name == "epsilon_greedy":
                eps = 1.0 / math.sqrt(state.t + 1) if strategy.decay else strategy.epsilon
                arm = select_epsilon_greedy(state, eps, rng)
            elif name == "ucb":
                arm = select_ucb(state, strategy.c)
            else:
                p = boltzmann_probs(state.q, strategy.tau)
                arm = int(min(np.searchsorted(np.cumsum(p), rng.random(), side="right"), len(p) - 1))
            r = env.pull(arm, rng)
            state.update(arm, r)
        arms[i] = arm
        rewards[i] = r
    regret = np.cumsum(gaps[arms])
    return BanditHistory(int(seed), arms, rewards, regret, state)


def write_bandit_csv(histories, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for h in histories:
            w.writerows(h.rows())
