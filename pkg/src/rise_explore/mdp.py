"""Finite MDPs, exact dynamic-programming solvers and trajectory containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import UnsupportedError, ValidationError

_STOCH_TOL = 1e-9


def _check_simplex(p: np.ndarray, what: str, axis: int = -1) -> None:
    if np.any(p < 0):
        raise ValidationError(f"{what} has negative entries")
    if not np.allclose(p.sum(axis=axis), 1.0, atol=_STOCH_TOL, rtol=0.0):
        raise ValidationError(f"{what} does not sum to 1")


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """M = <S, A, T, r, rho, gamma> with terminal states modelled as absorbing.

    ``transition[s, a, s']`` is T(s'|s,a) and ``reward[s, a]`` is r(s,a).
    ``cells`` optionally records the grid coordinate of each state for
    grid-based environments.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    discount: float
    terminal: np.ndarray | None = None
    cells: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        T = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        rho = np.asarray(self.initial_dist, dtype=float)
        if T.ndim != 3 or T.shape[0] != T.shape[2] or T.shape[0] < 1 or T.shape[1] < 1:
            raise ValidationError(f"transition must have shape (S, A, S), got {T.shape}")
        n, m = T.shape[:2]
        if r.shape != (n, m):
            raise ValidationError(f"reward must have shape {(n, m)}, got {r.shape}")
        if rho.shape != (n,):
            raise ValidationError(f"initial_dist must have shape {(n,)}, got {rho.shape}")
        _check_simplex(T, "transition rows")
        _check_simplex(rho, "initial_dist")
        if not 0.0 <= self.discount <= 1.0:
            raise ValidationError(f"discount must lie in [0, 1], got {self.discount}")
        term = np.zeros(n, dtype=bool) if self.terminal is None else np.asarray(self.terminal, dtype=bool)
        if term.shape != (n,):
            raise ValidationError("terminal flags must have one entry per state")
        for s in np.flatnonzero(term):
            if not np.all(T[s, :, s] == 1.0) or np.any(r[s] != 0.0):
                raise ValidationError(f"terminal state {s} must self-loop with reward 0")
        if self.cells is not None and len(self.cells) != n:
            raise ValidationError("cells must have one entry per state")
        for name, arr in (("transition", T), ("reward", r), ("initial_dist", rho), ("terminal", term)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward: np.ndarray) -> "TabularMdp":
        return TabularMdp(self.transition, reward, self.initial_dist, self.discount,
                          self.terminal, self.cells)

    def with_discount(self, discount: float) -> "TabularMdp":
        return TabularMdp(self.transition, self.reward, self.initial_dist, discount,
                          self.terminal, self.cells)


def softmax_rows(h: np.ndarray) -> np.ndarray:
    z = h - h.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Stochastic policy pi[s, a]; optionally backed by softmax preferences."""

    probs: np.ndarray
    preferences: np.ndarray | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValidationError("policy table must be 2-D (S, A)")
        _check_simplex(p, "policy rows")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_preferences(cls, h: np.ndarray) -> "TabularPolicy":
        h = np.array(h, dtype=float)
        return cls(softmax_rows(h), preferences=h)

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "TabularPolicy":
        actions = np.asarray(actions, dtype=int)
        p = np.zeros((len(actions), n_actions))
        p[np.arange(len(actions)), actions] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @property
    def representation(self) -> str:
        return "explicit" if self.preferences is None else "softmax"


@dataclass
class ValueTables:
    v: np.ndarray
    q: np.ndarray
    advantage: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.advantage = self.q - self.v[:, None]


@dataclass(frozen=True, eq=False)
class StateDistribution:
    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise ValidationError("state distribution must be a vector")
        _check_simplex(p, "state distribution")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    extrinsic_reward: float
    next_state: int
    embedding: np.ndarray | None = None
    intrinsic_reward: float | None = None


@dataclass
class Trajectory:
    transitions: list[Transition]
    episode: int = 0
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.transitions) < 1:
            raise ValidationError("a trajectory needs at least one transition")

    def __len__(self) -> int:
        return len(self.transitions)

    def validate(self, n_states: int, n_actions: int) -> None:
        for tr in self.transitions:
            if not (0 <= tr.state < n_states and 0 <= tr.next_state < n_states):
                raise ValidationError(f"state index out of range in {tr}")
            if not 0 <= tr.action < n_actions:
                raise ValidationError(f"action index out of range in {tr}")

    @property
    def rewards(self) -> np.ndarray:
        return np.array([tr.extrinsic_reward for tr in self.transitions])


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """G_t = R_{t+1} + gamma * G_{t+1}, computed backward (G_T = 0)."""
    out = np.zeros(len(rewards))
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


@dataclass(eq=False)
class MixedPolicy:
    """Weighted collection of policies (omega, Pi_hat)."""

    members: list[TabularPolicy]
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if len(self.members) == 0:
            raise ValidationError("a mixed policy needs at least one member")
        if w.shape != (len(self.members),):
            raise ValidationError("one weight per member required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12 * max(1, len(w)) ** 0.5 + 1e-12:
            raise ValidationError("mixture weights must lie on the simplex")
        self.weights = w

    @classmethod
    def single(cls, policy: TabularPolicy) -> "MixedPolicy":
        return cls([policy], np.ones(1))

    def extend(self, policy: TabularPolicy, eta: float) -> "MixedPolicy":
        """omega_{t+1} = ((1 - eta) omega_t, eta)."""
        return MixedPolicy(self.members + [policy], np.append((1.0 - eta) * self.weights, eta))

    def compact(self) -> "MixedPolicy":
        """Merge identical member tables, summing their weights."""
        seen: dict[bytes, int] = {}
        members: list[TabularPolicy] = []
        weights: list[float] = []
        for pol, w in zip(self.members, self.weights):
            key = pol.probs.tobytes()
            if key in seen:
                weights[seen[key]] += w
            else:
                seen[key] = len(members)
                members.append(pol)
                weights.append(w)
        w = np.array(weights)
        return MixedPolicy(members, w / w.sum())


# ---------------------------------------------------------------------------
# dynamic programming

def _require_discounted(mdp: TabularMdp) -> None:
    if mdp.discount >= 1.0:
        raise UnsupportedError("undiscounted (gamma = 1) problems are not supported")


def bellman_optimality(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    v = q.max(axis=1)
    return mdp.reward + mdp.discount * mdp.transition @ v


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Argmax per row; np.argmax already breaks ties toward the lowest index."""
    return np.argmax(q, axis=1)


def greedy_policy(q: np.ndarray) -> TabularPolicy:
    return TabularPolicy.deterministic(greedy_actions(q), q.shape[1])


def value_iteration(mdp: TabularMdp, tol: float = 1e-10, q0: np.ndarray | None = None,
                    max_iter: int = 10_000_000) -> ValueTables:
    """Iterate Q <- BQ until the Bellman residual max-norm is at most ``tol``."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    _require_discounted(mdp)
    q = np.zeros((mdp.n_states, mdp.n_actions)) if q0 is None else np.array(q0, dtype=float)
    for _ in range(max_iter):
        q_new = bellman_optimality(mdp, q)
        if np.max(np.abs(q_new - q)) <= tol:
            q = q_new
            break
        q = q_new
    return ValueTables(q.max(axis=1), q)


def _policy_matrices(mdp: TabularMdp, policy: TabularPolicy) -> tuple[np.ndarray, np.ndarray]:
    pi = policy.probs
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(f"policy shape {pi.shape} does not match MDP")
    p_pi = np.einsum("sa,sat->st", pi, mdp.transition)
    r_pi = np.einsum("sa,sa->s", pi, mdp.reward)
    return p_pi, r_pi


def _q_from_v(mdp: TabularMdp, v: np.ndarray) -> np.ndarray:
    return mdp.reward + mdp.discount * mdp.transition @ v


def solve_policy_values(mdp: TabularMdp, policy: TabularPolicy) -> ValueTables:
    """Exact V^pi from (I - gamma P_pi) V = r_pi (LU with partial pivoting)."""
    _require_discounted(mdp)
    p_pi, r_pi = _policy_matrices(mdp, policy)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, r_pi)
    return ValueTables(v, _q_from_v(mdp, v))


def policy_evaluation(mdp: TabularMdp, policy: TabularPolicy, tol: float = 1e-10,
                      exact: bool = False) -> ValueTables:
    """V^pi by iterating the Bellman expectation operator (or exactly)."""
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if exact:
        return solve_policy_values(mdp, policy)
    _require_discounted(mdp)
    p_pi, r_pi = _policy_matrices(mdp, policy)
    v = np.zeros(mdp.n_states)
    while True:
        v_new = r_pi + mdp.discount * p_pi @ v
        done = np.max(np.abs(v_new - v)) <= tol
        v = v_new
        if done:
            break
    return ValueTables(v, _q_from_v(mdp, v))


def state_occupancy(mdp: TabularMdp, policy: TabularPolicy) -> StateDistribution:
    """Discounted occupancy d(s) = (1 - gamma) sum_t gamma^t Pr(s_t = s)."""
    _require_discounted(mdp)
    p_pi, _ = _policy_matrices(mdp, policy)
    gamma = mdp.discount
    a = np.eye(mdp.n_states) - gamma * p_pi.T
    d = np.linalg.solve(a, (1.0 - gamma) * mdp.initial_dist)
    if not np.all(np.isfinite(d)):
        raise RuntimeError("occupancy system is singular")
    # round-off can leave entries at -1e-17
    d = np.clip(d, 0.0, None)
    return StateDistribution(d / d.sum())


def occupancy_of_mixture(mdp: TabularMdp, mix: MixedPolicy) -> StateDistribution:
    d = np.zeros(mdp.n_states)
    cache: dict[bytes, np.ndarray] = {}
    for pol, w in zip(mix.members, mix.weights):
        key = pol.probs.tobytes()
        if key not in cache:
            cache[key] = state_occupancy(mdp, pol).probs
        d += w * cache[key]
    return StateDistribution(d / d.sum())


# ---------------------------------------------------------------------------
# text serialization

def dumps_mdp(mdp: TabularMdp) -> str:
    """Header ``n_states n_actions gamma``; one line per (s, a) with reward then
    T(.|s,a); the initial distribution on the last line."""
    lines = [f"{mdp.n_states} {mdp.n_actions} {mdp.discount!r}"]
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            row = [repr(float(mdp.reward[s, a]))] + [repr(float(x)) for x in mdp.transition[s, a]]
            lines.append(" ".join(row))
    lines.append(" ".join(repr(float(x)) for x in mdp.initial_dist))
    return "\n".join(lines) + "\n"


def loads_mdp(text: str) -> TabularMdp:
    """Inverse of :func:`dumps_mdp`.

    The format has no terminal flags; states that self-loop under every action
    with zero reward are marked terminal, which is behaviourally identical.
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise ValidationError("header must be 'n_states n_actions gamma'")
    try:
        n, m, gamma = int(rows[0][0]), int(rows[0][1]), float(rows[0][2])
    except ValueError as exc:
        raise ValidationError(f"bad header: {exc}") from None
    if len(rows) != 1 + n * m + 1:
        raise ValidationError(f"expected {n * m + 2} lines, found {len(rows)}")
    body = rows[1:1 + n * m]
    if any(len(r) != n + 1 for r in body):
        raise ValidationError(f"each (s, a) line needs 1 + {n} numbers")
    try:
        data = np.array(body, dtype=float).reshape(n, m, n + 1)
        rho = np.array(rows[-1], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry: {exc}") from None
    reward, transition = data[..., 0], data[..., 1:]
    terminal = np.array([np.all(transition[s, :, s] == 1.0) and np.all(reward[s] == 0.0)
                         for s in range(n)])
    return TabularMdp(transition, reward, rho, gamma, terminal)


def save_mdp(mdp: TabularMdp, path: str | Path) -> None:
    Path(path).write_text(dumps_mdp(mdp))


def load_mdp(path: str | Path) -> TabularMdp:
    return loads_mdp(Path(path).read_text())
