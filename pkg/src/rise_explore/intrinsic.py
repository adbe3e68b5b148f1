"""Intrinsic reward generators and reward composition.

Stateless formulas live at module level. Stateful generators share a small
interface used by the tabular agents: ``begin_episode(state)`` at reset and
``reward(state, next_state)`` once per environment step, returning the bonus
for arriving in ``next_state``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import EpisodicMemory, episodic_pseudo_count, state_embeddings
from .entropy import action_entropy
from .errors import ValidationError
from .knn import kth_neighbor_distance
from .rng import make_rng

GENERATOR_NAMES = ("none", "rise", "re3", "pseudo_count", "rnd", "ngu", "ride")


@dataclass(frozen=True)
class IntrinsicConfig:
    alpha: float = 0.1
    lambda0: float = 0.1
    kappa: float = 1e-5
    zeta: float = 0.0
    k: int = 5
    embed_dim: int = 16

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.lambda0 < 0:
            raise ValidationError("lambda0 must be non-negative")
        if not 0.0 <= self.kappa < 1.0:
            raise ValidationError("kappa must lie in [0, 1)")
        if self.zeta < 0:
            raise ValidationError("zeta must be non-negative")
        if self.k < 1 or self.embed_dim < 1:
            raise ValidationError("k and embed_dim must be positive")


# ---------------------------------------------------------------------------
# formulas


def rise_reward(y, neighbors, alpha: float, k: int) -> float:
    """||y - y~||^(1 - alpha) with y~ the k-th nearest neighbour."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    d = kth_neighbor_distance(y, neighbors, k)
    return d ** (1.0 - alpha) if d > 0 else 0.0


def re3_reward(x, neighbors, k: int) -> float:
    """log(||x - x~|| + 1)."""
    return math.log1p(kth_neighbor_distance(x, neighbors, k))


def pseudo_count_from_probs(psi: float, psi_prime: float) -> float:
    """N = psi (1 - psi') / (psi' - psi)."""
    if not psi_prime > psi:
        raise RuntimeError("density model is not learning-positive")
    return psi * (1.0 - psi_prime) / (psi_prime - psi)


def prediction_gain(psi: float, psi_prime: float) -> float:
    return math.log(psi_prime) - math.log(psi)


def pseudo_count_from_gain(pg: float) -> float:
    """Approximation N ~ 1 / (exp(PG) - 1)."""
    return 1.0 / math.expm1(pg)


def ngu_mixed_reward(r_episodic: float, alpha_t: float, beta_cap: float) -> float:
    """r_episodic * min(max(alpha_t, 1), beta_cap)."""
    if beta_cap < 1:
        raise ValidationError("beta_cap must be at least 1")
    return r_episodic * min(max(alpha_t, 1.0), beta_cap)


def ride_reward(phi_s, phi_next, n_ep: int) -> float:
    """||phi(s') - phi(s)|| / sqrt(N_ep(s'))."""
    if n_ep < 1:
        raise ValidationError("episodic count must be at least 1")
    diff = np.asarray(phi_next, dtype=float) - np.asarray(phi_s, dtype=float)
    return float(np.linalg.norm(diff)) / math.sqrt(n_ep)


def pbrs_shaping(potential, s: int, s_next: int, gamma: float) -> float:
    """f(s, a, s') = gamma phi(s') - phi(s)."""
    return gamma * float(potential[s_next]) - float(potential[s])


def manhattan_potential(cells, goal) -> np.ndarray:
    """phi_0(s) = -|row - goal_row| - |col - goal_col|."""
    c = np.asarray(cells, dtype=float)
    return -np.abs(c - np.asarray(goal, dtype=float)).sum(axis=1)


def shaped_reward_table(mdp, potential) -> np.ndarray:
    """Expected r(s, a) + f(s, a, s') under T; zero on terminal states."""
    phi = np.asarray(potential, dtype=float)
    f = mdp.discount * mdp.transition @ phi - phi[:, None]
    f[mdp.terminal] = 0.0
    return mdp.reward + f


def decay_coefficient(lambda0: float, kappa: float, t: int) -> float:
    """lambda_t = lambda0 (1 - kappa)^t."""
    if not 0.0 <= kappa < 1.0:
        raise ValidationError("kappa must lie in [0, 1)")
    return lambda0 * (1.0 - kappa) ** t


def compose_total_reward(r_ext: float, r_int: float, lambda_t: float, zeta: float,
                         policy_row=None) -> float:
    """r + lambda_t r_hat + zeta H(pi(.|s))."""
    total = r_ext + lambda_t * r_int
    if zeta:
        total += zeta * action_entropy(policy_row)
    return total


# ---------------------------------------------------------------------------
# density model and linear RND


class PseudoCountModel:
    """Dirichlet-smoothed categorical density psi_n(s) = (N(s)+a) / (n + a|S|)."""

    def __init__(self, n_states: int, smoothing: float = 0.01) -> None:
        if n_states < 1 or smoothing <= 0:
            raise ValidationError("need n_states >= 1 and smoothing > 0")
        self.n_states, self.a = n_states, float(smoothing)
        self.counts = np.zeros(n_states)
        self.total = 0

    def prob(self, s: int) -> float:
        return (self.counts[s] + self.a) / (self.total + self.a * self.n_states)

    def recoding_prob(self, s: int) -> float:
        return (self.counts[s] + 1 + self.a) / (self.total + 1 + self.a * self.n_states)

    def observe(self, s: int) -> None:
        self.counts[s] += 1
        self.total += 1

    def prediction_gain(self, s: int) -> float:
        return prediction_gain(self.prob(s), self.recoding_prob(s))


def pseudo_count_reward(model: PseudoCountModel, s: int) -> tuple[float, float]:
    """Return (N_hat, 1/sqrt(N_hat)) for state ``s`` under the current model."""
    n_hat = pseudo_count_from_probs(model.prob(s), model.recoding_prob(s))
    return n_hat, 1.0 / math.sqrt(n_hat)


class LinearRnd:
    """Fixed random linear target f(x) = W_t x and a linear predictor W_p x
    trained by gradient descent on ||W_p x - W_t x||^2."""

    def __init__(self, input_dim: int, embed_dim: int = 16, learning_rate: float = 0.1,
                 seed: int = 0, predictor_init: str = "random") -> None:
        rng = make_rng(seed, 0x726E64)
        scale = 1.0 / math.sqrt(input_dim)
        self.target = rng.standard_normal((embed_dim, input_dim)) * scale
        self.target.setflags(write=False)
        if predictor_init == "random":
            self.predictor = rng.standard_normal((embed_dim, input_dim)) * scale
        elif predictor_init == "zeros":
            self.predictor = np.zeros((embed_dim, input_dim))
        elif predictor_init == "target":
            self.predictor = self.target.copy()
        else:
            raise ValidationError(f"unknown predictor_init {predictor_init!r}")
        self.learning_rate = learning_rate
        self.input_dim = input_dim

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape != (self.input_dim,):
            raise ValidationError(f"expected input of dimension {self.input_dim}")
        return x

    def error(self, x) -> np.ndarray:
        x = self._check(x)
        return self.predictor @ x - self.target @ x

    def loss(self, x) -> float:
        e = self.error(x)
        return float(e @ e)

    def train(self, x) -> None:
        x = self._check(x)
        e = self.predictor @ x - self.target @ x
        self.predictor -= self.learning_rate * 2.0 * np.outer(e, x)


def rnd_reward(rnd: LinearRnd, x) -> float:
    return float(np.linalg.norm(rnd.error(x)))


# ---------------------------------------------------------------------------
# generators for tabular agents


class IntrinsicGenerator:
    name = "none"

    def begin_episode(self, state: int) -> None:
        pass

    def reward(self, state: int, next_state: int) -> float:
        return 0.0


class _EpisodeKnn(IntrinsicGenerator):
    """k-NN over the multiset of embeddings visited in the current episode.

    Distances are precomputed between the (few) distinct states, and the k-th
    neighbour of an arriving state is read off its sorted distance row weighted
    by per-episode visit tallies, which is exactly brute-force k-NN over the
    episode buffer.
    """

    def __init__(self, embeddings: np.ndarray, k: int) -> None:
        e = np.asarray(embeddings, dtype=float)
        self.k = int(k)
        d = np.sqrt(((e[:, None, :] - e[None, :, :]) ** 2).sum(axis=2))
        self._order = np.argsort(d, axis=1, kind="stable")
        self._sorted = np.take_along_axis(d, self._order, axis=1)
        self._counts = np.zeros(len(e), dtype=np.int64)
        self._size = 0
        # one-hot style tables: every pair of distinct states at the same distance
        off = d[~np.eye(len(e), dtype=bool)]
        self._equidistant = float(off[0]) if len(off) and np.all(off == off[0]) and off[0] > 0 else None

    def begin_episode(self, state: int) -> None:
        self._counts[:] = 0
        self._counts[state] = 1
        self._size = 1

    def kth_distance(self, state: int) -> float | None:
        """k-th NN distance of ``state`` among the other buffer entries."""
        if self._size - 1 < self.k:
            return None
        if self._equidistant is not None:
            return 0.0 if self._counts[state] - 1 >= self.k else self._equidistant
        c = self._counts[self._order[state]]
        c[0] -= 1  # the query itself (first in its own sorted row)
        idx = int(np.searchsorted(np.cumsum(c), self.k))
        return float(self._sorted[state, idx])

    def _push(self, state: int) -> None:
        self._counts[state] += 1
        self._size += 1

    def _bonus(self, dist: float) -> float:
        raise NotImplementedError

    def reward(self, state: int, next_state: int) -> float:
        self._push(next_state)
        d = self.kth_distance(next_state)
        return 0.0 if d is None else self._bonus(d)


class RiseGenerator(_EpisodeKnn):
    name = "rise"

    def __init__(self, embeddings: np.ndarray, alpha: float, k: int) -> None:
        if not 0.0 < alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        super().__init__(embeddings, k)
        self.alpha = alpha

    def _bonus(self, dist: float) -> float:
        return dist ** (1.0 - self.alpha) if dist > 0 else 0.0


class Re3Generator(_EpisodeKnn):
    name = "re3"

    def _bonus(self, dist: float) -> float:
        return math.log1p(dist)


class PseudoCountGenerator(IntrinsicGenerator):
    name = "pseudo_count"

    def __init__(self, n_states: int, smoothing: float = 0.01) -> None:
        self.model = PseudoCountModel(n_states, smoothing)

    def begin_episode(self, state: int) -> None:
        if self.model.total == 0:
            self.model.observe(state)

    def reward(self, state: int, next_state: int) -> float:
        _, r = pseudo_count_reward(self.model, next_state)
        self.model.observe(next_state)
        return r


class RndGenerator(IntrinsicGenerator):
    name = "rnd"

    def __init__(self, embeddings: np.ndarray, embed_dim: int = 16, learning_rate: float = 0.1,
                 seed: int = 0) -> None:
        self.embeddings = np.asarray(embeddings, dtype=float)
        self.rnd = LinearRnd(self.embeddings.shape[1], embed_dim, learning_rate, seed)

    def reward(self, state: int, next_state: int) -> float:
        x = self.embeddings[next_state]
        r = rnd_reward(self.rnd, x)
        self.rnd.train(x)
        return r


class NguGenerator(IntrinsicGenerator):
    """Episodic kernel novelty scaled by a life-long RND factor.

    The life-long factor is the RND error divided by its running mean.
    """

    name = "ngu"

    def __init__(self, embeddings: np.ndarray, k: int = 10, beta_cap: float = 5.0,
                 embed_dim: int = 16, learning_rate: float = 0.1, seed: int = 0,
                 c: float = 1e-3) -> None:
        self.embeddings = np.asarray(embeddings, dtype=float)
        self.memory = EpisodicMemory(self.embeddings.shape[1], k=k, c=c)
        self.rnd = LinearRnd(self.embeddings.shape[1], embed_dim, learning_rate, seed)
        self.beta_cap = beta_cap
        self._err_sum = 0.0
        self._err_count = 0

    def begin_episode(self, state: int) -> None:
        self.memory.reset()
        self.memory.add(self.embeddings[state])

    def reward(self, state: int, next_state: int) -> float:
        e = self.embeddings[next_state]
        r_ep = episodic_pseudo_count(self.memory, e)
        self.memory.add(e)
        err = rnd_reward(self.rnd, e)
        self.rnd.train(e)
        self._err_sum += err
        self._err_count += 1
        mean = self._err_sum / self._err_count
        alpha_t = err / mean if mean > 0 else 1.0
        return ngu_mixed_reward(r_ep, alpha_t, self.beta_cap)


class RideGenerator(IntrinsicGenerator):
    name = "ride"

    def __init__(self, embeddings: np.ndarray) -> None:
        self.embeddings = np.asarray(embeddings, dtype=float)
        self._counts = np.zeros(len(self.embeddings), dtype=np.int64)

    def begin_episode(self, state: int) -> None:
        self._counts[:] = 0
        self._counts[state] = 1

    def reward(self, state: int, next_state: int) -> float:
        self._counts[next_state] += 1
        return ride_reward(self.embeddings[state], self.embeddings[next_state],
                           int(self._counts[next_state]))


def make_generator(name: str, n_states: int, config: IntrinsicConfig | None = None,
                   embedding: str = "one_hot", seed: int = 0, cells=None) -> IntrinsicGenerator:
    """Build a generator by name; ``embedding`` selects the state embeddings."""
    if name not in GENERATOR_NAMES:
        raise ValidationError(f"unknown intrinsic reward {name!r}; valid: {', '.join(GENERATOR_NAMES)}")
    cfg = config or IntrinsicConfig()
    if name == "none":
        return IntrinsicGenerator()
    if name == "pseudo_count":
        return PseudoCountGenerator(n_states)
    emb = state_embeddings(n_states, embedding, cfg.embed_dim, seed, cells)
    if name == "rise":
        return RiseGenerator(emb, cfg.alpha, cfg.k)
    if name == "re3":
        return Re3Generator(emb, cfg.k)
    if name == "rnd":
        return RndGenerator(emb, cfg.embed_dim, seed=seed)
    if name == "ngu":
        return NguGenerator(emb, k=cfg.k, embed_dim=cfg.embed_dim, seed=seed)
    return RideGenerator(emb)
