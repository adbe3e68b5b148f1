"""Maximum-entropy policy computation on tabular MDPs, its iteration bound,
and the coupon-collector expected-time functional."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .entropy import SmoothedEntropyParams, smoothed_renyi, smoothed_renyi_gradient
from .errors import DivergenceError, ValidationError
from .mdp import (MixedPolicy, StateDistribution, TabularMdp, TabularPolicy, greedy_actions,
                  occupancy_of_mixture, state_occupancy)
from .rng import as_rng


@dataclass(frozen=True)
class IterationBound:
    iterations: int
    eps1: float
    eps2: float
    eta: float
    beta: float
    vacuous: bool


def iteration_bound(alpha: float, sigma: float, epsilon: float) -> IterationBound:
    """Smallest T with T >= (10 beta / eps) log(10 B / eps), where beta is the
    smoothness constant and B the gradient bound of the smoothed entropy.

    Tolerances follow the same bound: eps1 = eps/10, eps2 = eta = eps/(10 beta).
    When the log argument is at most 1 the bound is vacuous and T = 1.
    """
    params = SmoothedEntropyParams(alpha, sigma)
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    beta = params.beta
    arg = 10.0 * params.gradient_bound / epsilon
    small = 0.1 * epsilon / beta
    if arg <= 1.0:
        return IterationBound(1, 0.1 * epsilon, small, small, beta, True)
    t = math.ceil(10.0 * beta / epsilon * math.log(arg))
    return IterationBound(max(int(t), 1), 0.1 * epsilon, small, small, beta, False)


@dataclass(frozen=True)
class MepcConfig:
    iterations: int
    eta: float
    eps1: float
    eps2: float
    sigma: float
    alpha: float
    sampling_steps: int = 0  # > 0 switches the distribution oracle to rollouts

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValidationError("iterations must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError("eta must lie in (0, 1]")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValidationError("oracle tolerances must be positive")
        SmoothedEntropyParams(self.alpha, self.sigma)

    @property
    def params(self) -> SmoothedEntropyParams:
        return SmoothedEntropyParams(self.alpha, self.sigma)

    @classmethod
    def from_bound(cls, alpha: float, sigma: float, epsilon: float,
                   iterations: int | None = None) -> "MepcConfig":
        b = iteration_bound(alpha, sigma, epsilon)
        return cls(iterations or b.iterations, b.eta, b.eps1, b.eps2, sigma, alpha)


# ---------------------------------------------------------------------------
# oracles


def planning_tolerance(eps1: float, discount: float) -> float:
    """Bellman residual that makes the greedy policy eps1-optimal.

    A residual delta puts Q within delta/(1-gamma) of Q*, and the greedy policy
    then loses at most 2 delta / (1-gamma)^2.
    """
    return eps1 * (1.0 - discount) ** 2 / 2.0


def _state_reward_q(mdp: TabularMdp, r_state: np.ndarray, q0=None, tol: float = 1e-10) -> np.ndarray:
    reward = np.broadcast_to(np.asarray(r_state, dtype=float)[:, None], mdp.reward.shape)
    t, gamma = mdp.transition, mdp.discount
    q = np.zeros(reward.shape) if q0 is None else np.array(q0, dtype=float)
    while True:
        q_new = reward + gamma * (t @ q.max(axis=1))
        if np.max(np.abs(q_new - q)) <= tol:
            return q_new
        q = q_new


def planning_oracle(mdp: TabularMdp, reward_vector, eps1: float, q0=None) -> TabularPolicy:
    """Greedy policy of value iteration on the state reward r(s), broadcast
    over actions. Ties break toward the lowest action index."""
    r = np.asarray(reward_vector, dtype=float)
    if r.shape != (mdp.n_states,):
        raise ValidationError("reward vector needs one entry per state")
    if eps1 <= 0:
        raise ValidationError("eps1 must be positive")
    q = _state_reward_q(mdp, r, q0, planning_tolerance(eps1, mdp.discount))
    return TabularPolicy.deterministic(greedy_actions(q), mdp.n_actions)


def sample_occupancy(mdp: TabularMdp, mix: MixedPolicy, steps: int,
                     rng: np.random.Generator | int | None = 0) -> StateDistribution:
    """Rollout estimate of the discounted occupancy of a mixture.

    One long run that restarts from rho with probability 1 - gamma before each
    step (drawing a fresh member policy at every restart) has the discounted
    occupancy as its stationary law; visits are tallied over ``steps`` steps.
    """
    if steps < 1:
        raise ValidationError("need at least one step")
    rng = as_rng(rng)
    n, gamma = mdp.n_states, mdp.discount
    t_cdf = np.cumsum(mdp.transition, axis=2)
    rho_cdf = np.cumsum(mdp.initial_dist)
    w_cdf = np.cumsum(mix.weights)
    pol_cdf = [np.cumsum(p.probs, axis=1) for p in mix.members]
    u = rng.random((steps, 3)).tolist()
    restart = (rng.random(steps) >= gamma).tolist()

    def draw(cdf, x):
        return min(int(np.searchsorted(cdf, x, side="right")), len(cdf) - 1)

    counts = np.zeros(n)
    member = draw(w_cdf, rng.random())
    s = draw(rho_cdf, rng.random())
    for i in range(steps):
        counts[s] += 1
        if restart[i]:
            member = draw(w_cdf, u[i][0])
            s = draw(rho_cdf, u[i][1])
            continue
        a = draw(pol_cdf[member][s], u[i][0])
        s = draw(t_cdf[s, a], u[i][2])
    return StateDistribution(counts / counts.sum())


def distribution_oracle(mdp: TabularMdp, mix: MixedPolicy, eps2: float = 0.0,
                        sampling_steps: int = 0, rng=0) -> StateDistribution:
    """Exact mixture occupancy, or a rollout estimate when ``sampling_steps`` > 0."""
    if eps2 < 0:
        raise ValidationError("eps2 must be non-negative")
    if sampling_steps > 0:
        return sample_occupancy(mdp, mix, sampling_steps, rng)
    return occupancy_of_mixture(mdp, mix)


# ---------------------------------------------------------------------------
# main loop


@dataclass(frozen=True)
class MepcResult:
    """Outcome of a run; members are stored once and referenced per iteration."""

    initial: TabularPolicy
    unique_policies: tuple[TabularPolicy, ...]
    picks: np.ndarray  # index into unique_policies for iterations 1..T
    eta: float
    entropy_trace: np.ndarray  # smoothed entropy of the mixture at t = 0..T
    occupancy: np.ndarray  # final mixture occupancy
    initial_occupancy: np.ndarray
    policy_occupancies: np.ndarray  # one row per unique policy

    @property
    def iterations(self) -> int:
        return len(self.picks)

    def weights(self) -> np.ndarray:
        """omega_0 = (1-eta)^T and omega_i = eta (1-eta)^(T-i)."""
        t = self.iterations
        w = self.eta * (1.0 - self.eta) ** (t - np.arange(1, t + 1, dtype=float))
        return np.concatenate([[(1.0 - self.eta) ** t], w])

    def occupancy_trace(self, every: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Iterations 0, every, 2 every, ..., T and the mixture occupancy at each."""
        t_all = self.iterations
        marks = sorted(set(range(0, t_all + 1, max(every, 1))) | {t_all})
        out = np.empty((len(marks), len(self.initial_occupancy)))
        d = self.initial_occupancy.copy()
        j = 0
        for t in range(t_all + 1):
            if t == marks[j]:
                out[j] = d / d.sum()
                j += 1
            if t < t_all:
                d = (1.0 - self.eta) * d + self.eta * self.policy_occupancies[self.picks[t]]
        return np.array(marks), out

    def mixture(self, compact: bool = True) -> MixedPolicy:
        w = self.weights()
        if compact:
            merged = np.zeros(len(self.unique_policies) + 1)
            merged[0] = w[0]
            np.add.at(merged, self.picks + 1, w[1:])
            mix = MixedPolicy([self.initial, *self.unique_policies], merged / merged.sum())
            return mix.compact()
        members = [self.initial] + [self.unique_policies[i] for i in self.picks]
        return MixedPolicy(members, w / w.sum())


def run_mepc(mdp: TabularMdp, config: MepcConfig, initial: TabularPolicy | None = None,
             rng=0) -> MepcResult:
    """Frank-Wolfe style ascent on the smoothed Renyi entropy of the occupancy.

    Each iteration rewards states by the entropy gradient at the current
    mixture occupancy, plans a greedy policy for that reward and mixes it in
    with weight eta. Value iteration is warm-started from the previous Q.
    """
    params = config.params
    initial = initial or TabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    tol = planning_tolerance(config.eps1, mdp.discount)
    sampling = config.sampling_steps > 0
    rng = as_rng(rng)

    occ_cache: dict[bytes, np.ndarray] = {}
    index: dict[bytes, int] = {}
    unique: list[TabularPolicy] = []
    picks = np.empty(config.iterations, dtype=np.int64)
    trace = np.empty(config.iterations + 1)
    members: list[TabularPolicy] = [initial]
    weights = [1.0]

    d0 = state_occupancy(mdp, initial).probs.copy()
    d_mix = d0.copy()
    trace[0] = smoothed_renyi(d_mix, params)
    q = None
    eta = config.eta
    for t in range(config.iterations):
        if sampling:
            mix = MixedPolicy(members, np.asarray(weights) / sum(weights))
            d_hat = sample_occupancy(mdp, mix, config.sampling_steps, rng).probs
        else:
            d_hat = d_mix
        r = smoothed_renyi_gradient(d_hat, params)
        q = _state_reward_q(mdp, r, q, tol)
        acts = greedy_actions(q)
        key = acts.tobytes()
        if key not in index:
            pol = TabularPolicy.deterministic(acts, mdp.n_actions)
            index[key] = len(unique)
            unique.append(pol)
            occ_cache[key] = state_occupancy(mdp, pol).probs
        picks[t] = index[key]
        d_mix = (1.0 - eta) * d_mix + eta * occ_cache[key]
        if sampling:
            weights = [w * (1.0 - eta) for w in weights] + [eta]
            members.append(unique[index[key]])
        trace[t + 1] = smoothed_renyi(d_mix / d_mix.sum(), params)
    occs = np.array([occ_cache[p.probs.argmax(axis=1).tobytes()] for p in unique])
    return MepcResult(initial, tuple(unique), picks, eta, trace, d_mix / d_mix.sum(), d0, occs)


# ---------------------------------------------------------------------------
# coupon collector


def _as_probs(d) -> np.ndarray:
    p = d.probs if isinstance(d, StateDistribution) else np.asarray(d, dtype=float)
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("expected a probability vector")
    return p


def ccp_tail_bound(d, t_max: float) -> float:
    """Upper bound on the integral of 1 - prod(1 - exp(-d_i t)) over [t_max, inf)."""
    p = _as_probs(d)
    return float(np.sum(np.exp(-p * t_max) / p))


def ccp_expected_time(d, tol: float = 1e-6) -> float:
    """Expected collection time int_0^inf (1 - prod_i (1 - exp(-d_i t))) dt.

    The integrand is bounded by sum_i exp(-d_i t), so its tail beyond T_max is
    at most |S| exp(-d_min T_max) / d_min; T_max is chosen to make that tol/2
    and the quadrature runs to tol/2 on [0, T_max].
    """
    p = _as_probs(d)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if np.any(p == 0):
        raise DivergenceError("a state with zero probability is never collected")
    d_min = float(p.min())
    t_max = max(math.log(2.0 * len(p) / (d_min * tol)) / d_min, 0.0)

    def integrand(t: float) -> float:
        return -math.expm1(float(np.sum(np.log(-np.expm1(-p * t))))) if t > 0 else 1.0

    # split at a few multiples of the mean so quad sees the shoulder
    knots = sorted({0.0, *[min(x, t_max) for x in (1.0 / p.max(), len(p) / 2.0, 1.0 / d_min)], t_max})
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b > a:
            total += integrate.quad(integrand, a, b, epsabs=tol / (2 * len(knots)), epsrel=0.0,
                                    limit=500)[0]
    return total


def ccp_monte_carlo(d, runs: int = 100_000, rng=0, chunk: int | None = None,
                    batch: int = 4096) -> np.ndarray:
    """Number of i.i.d. draws from ``d`` needed to see every state, per run."""
    p = _as_probs(d)
    if np.any(p == 0):
        raise DivergenceError("a state with zero probability is never collected")
    rng = as_rng(rng)
    n = len(p)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    chunk = chunk or max(64, int(2 * n * math.log(n + 1) + 32))
    out = np.empty(runs, dtype=np.int64)
    for lo in range(0, runs, batch):
        b = min(batch, runs - lo)
        first = np.full((b, n), -1, dtype=np.int64)
        offset = 0
        pending = np.arange(b)
        while len(pending):
            draws = np.searchsorted(cdf, rng.random((len(pending), chunk)), side="right")
            draws = np.minimum(draws, n - 1)
            hit = np.full((len(pending), n), np.iinfo(np.int64).max)
            rows = np.repeat(np.arange(len(pending)), chunk)
            cols = np.tile(np.arange(chunk), len(pending))
            np.minimum.at(hit, (rows, draws.ravel()), cols)
            sub = first[pending]
            fresh = (sub < 0) & (hit != np.iinfo(np.int64).max)
            sub[fresh] = hit[fresh] + offset
            first[pending] = sub
            offset += chunk
            pending = pending[np.any(first[pending] < 0, axis=1)]
        out[lo:lo + b] = first.max(axis=1) + 1
    return out
