"""Fixed observation encoders and the episodic k-NN memory."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .rng import make_rng


class RandomProjectionEncoder:
    """y = W x with W fixed at construction.

    Entries of W are standard normal scaled by 1/sqrt(n). With
    ``orthonormal=True`` (and m <= n) the rows are replaced by an orthonormal
    basis of their span, so the map never increases Euclidean norms.
    """

    def __init__(self, input_dim: int, embed_dim: int = 16, seed: int = 0,
                 orthonormal: bool = False) -> None:
        if input_dim < 1 or embed_dim < 1:
            raise ValidationError("dimensions must be positive")
        self.input_dim = int(input_dim)
        self.embed_dim = int(embed_dim)
        self.seed = int(seed)
        rng = make_rng(seed, 0x656E63)
        w = rng.standard_normal((embed_dim, input_dim)) / math.sqrt(input_dim)
        if orthonormal:
            if embed_dim > input_dim:
                raise ValidationError("orthonormal rows need embed_dim <= input_dim")
            q, r = np.linalg.qr(w.T)
            # fix the sign so W is a deterministic function of the seed
            w = (q * np.sign(np.diag(r))).T
        w.setflags(write=False)
        self.matrix = w
        self.orthonormal = orthonormal

    def encode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValidationError(f"expected input dimension {self.input_dim}, got {x.shape[-1]}")
        return x @ self.matrix.T

    __call__ = encode


def one_hot_encode(state: int, n_states: int) -> np.ndarray:
    if not 0 <= state < n_states:
        raise ValidationError(f"state {state} outside [0, {n_states})")
    e = np.zeros(n_states)
    e[state] = 1.0
    return e


def state_embeddings(n_states: int, kind: str = "one_hot", embed_dim: int = 16,
                     seed: int = 0, cells=None) -> np.ndarray:
    """Embedding table (n_states, m) for tabular environments.

    ``one_hot`` is the identity; ``projected`` passes the one-hot vectors
    through a :class:`RandomProjectionEncoder`; ``coordinates`` uses grid cells.
    """
    if kind == "one_hot":
        return np.eye(n_states)
    if kind == "projected":
        enc = RandomProjectionEncoder(n_states, embed_dim, seed, orthonormal=embed_dim <= n_states)
        return enc.encode(np.eye(n_states))
    if kind == "coordinates":
        if cells is None:
            raise ValidationError("coordinate embeddings need grid cells")
        return np.asarray(cells, dtype=float)
    raise ValidationError(f"unknown embedding kind {kind!r}")


class EpisodicMemory:
    """Within-episode memory with an inverse-kernel pseudo-count reward.

    The kernel is K(u, v) = eps / (d(u, v)^2 / d_m^2 + eps), with d_m^2 the
    running mean of squared k-NN distances from earlier queries. The reward
    is 1 / (sqrt(sum of kernels over the k nearest entries) + c).
    """

    def __init__(self, dim: int, capacity: int = 30_000, k: int = 10,
                 kernel_epsilon: float = 1e-3, c: float = 1e-3, max_reward: float = 1e3) -> None:
        if capacity < 1 or k < 1:
            raise ValidationError("capacity and k must be positive")
        if c < 0:
            raise ValidationError("c must be non-negative")
        self.dim, self.capacity, self.k = int(dim), int(capacity), int(k)
        self.kernel_epsilon, self.c, self.max_reward = kernel_epsilon, c, max_reward
        self._buf = np.zeros((capacity, dim))
        self.reset()

    def reset(self) -> None:
        self._size = 0
        self._head = 0
        self._dist_sum = 0.0
        self._dist_count = 0

    def __len__(self) -> int:
        return self._size

    @property
    def contents(self) -> np.ndarray:
        return self._buf[: self._size].copy()

    def add(self, e) -> None:
        e = np.asarray(e, dtype=float).ravel()
        if e.shape != (self.dim,):
            raise ValidationError(f"expected embedding of dimension {self.dim}")
        self._buf[self._head] = e
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def nearest_sq_distances(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float).ravel()
        d2 = ((self._buf[: self._size] - e) ** 2).sum(axis=1)
        kk = min(self.k, self._size)
        return np.sort(np.partition(d2, kk - 1)[:kk]) if kk else d2[:0]

    def pseudo_count(self, e) -> float:
        """Kernel sum over the k nearest entries; updates the running mean."""
        d2 = self.nearest_sq_distances(e)
        if len(d2) == 0:
            return 0.0
        # normalise by earlier queries; the very first query uses its own scale
        if self._dist_count:
            mean_d2 = self._dist_sum / self._dist_count
        else:
            mean_d2 = float(d2.mean())
        self._dist_sum += float(d2.sum())
        self._dist_count += len(d2)
        if mean_d2 > 0:
            scaled = d2 / mean_d2
        else:
            scaled = np.where(d2 > 0, np.inf, 0.0)
        eps = self.kernel_epsilon
        return float(np.sum(eps / (scaled + eps)))

    def reward(self, e) -> float:
        return episodic_pseudo_count(self, e)


def episodic_pseudo_count(memory: EpisodicMemory, e) -> float:
    """Episodic novelty reward 1 / (sqrt(kernel sum) + c).

    An empty memory with c = 0 returns ``memory.max_reward``.
    """
    total = math.sqrt(memory.pseudo_count(e)) + memory.c
    if total <= 0:
        return memory.max_reward
    return min(1.0 / total, memory.max_reward)
