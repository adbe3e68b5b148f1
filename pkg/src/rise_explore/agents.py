"""Tabular agents: epsilon-greedy Q-learning with optional intrinsic rewards,
REINFORCE with softmax preferences, and a clipped-surrogate actor-critic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import action_entropy
from .envs import CoverageCounter, TabularEnv
from .errors import ValidationError
from .intrinsic import IntrinsicConfig, IntrinsicGenerator
from .mdp import TabularMdp, Trajectory, Transition, discounted_returns, softmax_rows

_BLOCK = 4096


class UniformStream:
    """Uniform draws from a Generator, fetched in blocks for the hot loop.

    Consumption is a pure function of the number of draws requested, so two
    loops asking for the same sequence of draws see identical numbers.
    """

    def __init__(self, rng: np.random.Generator, block: int = _BLOCK) -> None:
        self.rng = rng
        self.block = block
        self._buf: list[float] = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self.rng.random(self.block).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


def _argmax(row) -> int:
    """Index of the first maximum (lowest-index tie-break)."""
    best, arg = row[0], 0
    for i in range(1, len(row)):
        if row[i] > best:
            best, arg = row[i], i
    return arg


def epsilon_greedy_row(q_row, epsilon: float) -> np.ndarray:
    """Action probabilities of the epsilon-greedy policy for one state."""
    n = len(q_row)
    p = np.full(n, epsilon / n)
    p[_argmax(list(q_row))] += 1.0 - epsilon
    return p


# ---------------------------------------------------------------------------
# Q-learning


@dataclass
class QLearningAgent:
    n_states: int
    n_actions: int
    step_size: float = 0.2
    epsilon: float = 0.001
    discount: float = 0.99
    epsilon_decay: float = 1.0  # multiplicative, applied per episode
    min_epsilon: float = 0.0
    terminal: np.ndarray | None = None
    intrinsic: IntrinsicConfig = field(default_factory=IntrinsicConfig)
    q: np.ndarray = field(init=False)
    global_step: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if not 0.0 < self.step_size <= 1.0:
            raise ValidationError("step size must lie in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise ValidationError("discount must lie in [0, 1]")
        self.q = np.zeros((self.n_states, self.n_actions))
        if self.terminal is None:
            self.terminal = np.zeros(self.n_states, dtype=bool)
        self.terminal = np.asarray(self.terminal, dtype=bool)

    @classmethod
    def for_mdp(cls, mdp: TabularMdp, **kwargs) -> "QLearningAgent":
        kwargs.setdefault("discount", mdp.discount)
        return cls(mdp.n_states, mdp.n_actions, terminal=mdp.terminal, **kwargs)

    def lambda_t(self) -> float:
        return self.intrinsic.lambda0 * (1.0 - self.intrinsic.kappa) ** self.global_step


def q_update(agent: QLearningAgent, s: int, a: int, reward: float, s_next: int) -> None:
    """Q(s,a) += eta [r + gamma max_a' Q(s',a') - Q(s,a)]; terminal s' bootstraps 0."""
    q = agent.q
    future = 0.0 if agent.terminal[s_next] else float(q[s_next].max())
    q[s, a] += agent.step_size * (reward + agent.discount * future - q[s, a])


@dataclass(frozen=True)
class EpisodeStats:
    steps: int
    extrinsic_return: float
    intrinsic_sum: float
    coverage_steps: int | None
    truncated: bool


def run_q_learning_episode(agent: QLearningAgent, env: TabularEnv, rng: np.random.Generator,
                           coverage: CoverageCounter | None = None,
                           generator: IntrinsicGenerator | None = None,
                           stream: UniformStream | None = None,
                           max_total_steps: int | None = None) -> EpisodeStats:
    """One epsilon-greedy episode, updating Q after every step.

    ``rng`` drives action selection (through ``stream`` when given, so that
    successive episodes share a block buffer) and any stochastic transitions.
    The intrinsic generator never touches ``rng``, so disabling it leaves the
    random sequence unchanged. ``max_total_steps`` stops the episode early once
    the agent's global step count reaches it.
    """
    stream = stream or UniformStream(rng)
    s = env.reset(rng)
    if coverage is not None:
        coverage.visit(s)
    use_bonus = generator is not None and type(generator) is not IntrinsicGenerator
    if generator is not None:
        generator.begin_episode(s)

    q = agent.q.tolist()
    terminal = agent.terminal.tolist()
    eta, gamma, eps = agent.step_size, agent.discount, agent.epsilon
    n_actions = agent.n_actions
    zeta = agent.intrinsic.zeta
    lam = agent.lambda_t()
    decay = 1.0 - agent.intrinsic.kappa
    cap = env.max_steps
    budget = None if max_total_steps is None else max_total_steps - agent.global_step
    steps, ext, intr = 0, 0.0, 0.0
    done = env.done
    while not done:
        if (cap is not None and steps >= cap) or (budget is not None and steps >= budget):
            break
        row = q[s]
        if eps > 0.0 and stream.next() < eps:
            a = int(stream.next() * n_actions)
        else:
            a = _argmax(row)
        s_next, r, done = env.step(a, rng)
        steps += 1
        ext += r
        total = r
        if use_bonus:
            b = generator.reward(s, s_next)
            intr += b
            total += lam * b
        if zeta:
            total += zeta * action_entropy(epsilon_greedy_row(row, eps))
        future = 0.0 if terminal[s_next] else max(q[s_next])
        row[a] += eta * (total + gamma * future - row[a])
        lam *= decay
        if coverage is not None:
            coverage.tick(s_next)
        s = s_next

    agent.q[:] = q
    agent.global_step += steps
    agent.epsilon = max(agent.min_epsilon, agent.epsilon * agent.epsilon_decay)
    truncated = not done
    return EpisodeStats(steps, ext, intr,
                        None if coverage is None else coverage.completed_at, truncated)


@dataclass(frozen=True)
class CoverageResult:
    """Outcome of training until every state has been visited."""

    steps: int  # steps to full coverage, or the budget when censored
    completed: bool
    episodes: int
    episode_stats: tuple[EpisodeStats, ...]
    discoveries: tuple[int, ...] = ()  # global step of each first visit


def steps_to_coverage(mdp: TabularMdp, agent: QLearningAgent, rng: np.random.Generator,
                      generator: IntrinsicGenerator | None = None,
                      episode_cap: int | None = None, max_total_steps: int = 10**7) -> CoverageResult:
    """Run episodes until all states are visited (across episodes) or the
    step budget runs out."""
    env = TabularEnv(mdp, episode_cap)
    coverage = CoverageCounter(mdp.n_states)
    stream = UniformStream(rng)
    stats = []
    while not coverage.coverage_complete and agent.global_step < max_total_steps:
        stats.append(run_q_learning_episode(agent, env, rng, coverage, generator, stream,
                                            max_total_steps))
    done = coverage.coverage_complete
    steps = coverage.completed_at if done else agent.global_step
    return CoverageResult(int(steps), done, len(stats), tuple(stats), tuple(coverage.discoveries))


# ---------------------------------------------------------------------------
# policy gradient


def log_softmax_grad(h_row, action: int) -> np.ndarray:
    """d ln pi(action) / d h = onehot(action) - pi."""
    g = -softmax_rows(np.asarray(h_row, dtype=float)[None, :])[0]
    g[action] += 1.0
    return g


@dataclass
class SoftmaxPgAgent:
    n_states: int
    n_actions: int
    step_size: float = 0.1
    baseline: str = "none"  # or "critic"
    critic_step_size: float = 0.1
    clip_epsilon: float = 0.2
    h: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.baseline not in ("none", "critic"):
            raise ValidationError("baseline must be 'none' or 'critic'")
        if self.step_size <= 0 or self.critic_step_size <= 0 or self.clip_epsilon < 0:
            raise ValidationError("step sizes must be positive and clip epsilon non-negative")
        self.h = np.zeros((self.n_states, self.n_actions))
        self.v = np.zeros(self.n_states)

    @property
    def probs(self) -> np.ndarray:
        return softmax_rows(self.h)

    def act(self, s: int, rng: np.random.Generator) -> int:
        p = softmax_rows(self.h[s][None, :])[0]
        return int(rng.choice(len(p), p=p))


def rollout(agent: SoftmaxPgAgent, env: TabularEnv, rng: np.random.Generator,
            episode: int = 0) -> Trajectory:
    s = env.reset(rng)
    steps = []
    done = env.done
    while not done and not env.truncated:
        a = agent.act(s, rng)
        s_next, r, done = env.step(a, rng)
        steps.append(Transition(s, a, r, s_next))
        s = s_next
    return Trajectory(tuple(steps), episode)


def vpg_update(agent: SoftmaxPgAgent, trajectory: Trajectory, gamma: float) -> None:
    """h(S_t) += step * gamma^t (G_t - b(S_t)) (onehot(A_t) - pi(.|S_t)), sequentially in t."""
    returns = discounted_returns(trajectory.rewards, gamma)
    for t, (tr, g) in enumerate(zip(trajectory.transitions, returns)):
        adv = g
        if agent.baseline == "critic":
            adv = g - agent.v[tr.state]
            agent.v[tr.state] += agent.critic_step_size * (g - agent.v[tr.state])
        if adv == 0.0:
            continue
        agent.h[tr.state] += agent.step_size * gamma ** t * adv * log_softmax_grad(agent.h[tr.state], tr.action)


def surrogate_objective(h: np.ndarray, old_probs: np.ndarray, states, actions, advantages,
                        clip_epsilon: float) -> float:
    """Mean of min(ratio * Z, Z + eps |Z|) with ratio = pi_h(a|s) / pi_old(a|s)."""
    s, a = np.asarray(states), np.asarray(actions)
    z = np.asarray(advantages, dtype=float)
    ratio = softmax_rows(h[s])[np.arange(len(s)), a] / old_probs[s, a]
    return float(np.mean(np.minimum(ratio * z, z + clip_epsilon * np.abs(z))))


def surrogate_gradient(h: np.ndarray, old_probs: np.ndarray, states, actions, advantages,
                       clip_epsilon: float) -> np.ndarray:
    """Gradient of :func:`surrogate_objective` w.r.t. the preference table.

    Samples on the clipped branch contribute nothing; at a tie the unclipped
    branch is used, so at h = h_old the result equals the unclipped gradient.
    """
    s, a = np.asarray(states), np.asarray(actions)
    z = np.asarray(advantages, dtype=float)
    pi = softmax_rows(h[s])
    idx = np.arange(len(s))
    ratio = pi[idx, a] / old_probs[s, a]
    active = ratio * z <= z + clip_epsilon * np.abs(z)
    glog = -pi
    glog[idx, a] += 1.0
    coef = np.where(active, ratio * z, 0.0) / len(s)
    grad = np.zeros_like(h, dtype=float)
    np.add.at(grad, s, coef[:, None] * glog)
    return grad


def td0_advantages(agent: SoftmaxPgAgent, trajectory: Trajectory, gamma: float,
                   terminal=None) -> np.ndarray:
    """Z_t = r_t + gamma V(s_{t+1}) - V(s_t) with terminal next-states valued 0,
    then one TD(0) sweep of the critic along the trajectory."""
    z = np.empty(len(trajectory))
    for t, tr in enumerate(trajectory.transitions):
        last = t == len(trajectory) - 1
        ends = terminal[tr.next_state] if terminal is not None else last
        target = tr.extrinsic_reward + (0.0 if ends else gamma * agent.v[tr.next_state])
        z[t] = target - agent.v[tr.state]
    for tr, zt in zip(trajectory.transitions, z):
        agent.v[tr.state] += agent.critic_step_size * zt
    return z


def clipped_surrogate_update(agent: SoftmaxPgAgent, trajectory: Trajectory, old_policy: np.ndarray,
                             clip_epsilon: float | None = None, advantages=None, gamma: float = 0.99,
                             epochs: int = 4, terminal=None) -> None:
    """A few gradient-ascent epochs on the clipped surrogate."""
    eps = agent.clip_epsilon if clip_epsilon is None else clip_epsilon
    if advantages is None:
        advantages = td0_advantages(agent, trajectory, gamma, terminal)
    z = np.asarray(advantages, dtype=float)
    if not np.any(z):
        return
    s = [tr.state for tr in trajectory.transitions]
    a = [tr.action for tr in trajectory.transitions]
    old = np.asarray(old_policy, dtype=float)
    for _ in range(epochs):
        agent.h += agent.step_size * surrogate_gradient(agent.h, old, s, a, z, eps)


def policy_entropy(agent: SoftmaxPgAgent, s: int) -> float:
    return action_entropy(agent.probs[s])


def softmax_log_prob(h_row, action: int) -> float:
    h = np.asarray(h_row, dtype=float)
    m = h.max()
    return float(h[action] - m - math.log(np.exp(h - m).sum()))
