import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rise_explore.embedding import (
    EpisodicMemory,
    RandomProjectionEncoder,
    episodic_pseudo_count,
    one_hot_encode,
    state_embeddings,
)
from rise_explore.errors import ValidationError


class TestEncoder:
    def test_linearity(self, rng):
        enc = RandomProjectionEncoder(12, 5, seed=3)
        np.testing.assert_array_equal(enc.encode(np.zeros(12)), np.zeros(5))
        x1, x2 = rng.normal(size=12), rng.normal(size=12)
        np.testing.assert_allclose(enc(x1 + x2), enc(x1) + enc(x2), atol=1e-12)

    def test_reproducible(self):
        a, b = RandomProjectionEncoder(7, 3, seed=9), RandomProjectionEncoder(7, 3, seed=9)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert not np.array_equal(a.matrix, RandomProjectionEncoder(7, 3, seed=10).matrix)
        with pytest.raises(ValueError):
            a.matrix[0, 0] = 1.0

    def test_orthonormal_contracts(self, rng):
        enc = RandomProjectionEncoder(20, 6, seed=1, orthonormal=True)
        np.testing.assert_allclose(enc.matrix @ enc.matrix.T, np.eye(6), atol=1e-12)
        x = rng.normal(size=(1000, 20)) * rng.exponential(size=(1000, 1))
        assert np.all(np.linalg.norm(enc(x), axis=1) <= np.linalg.norm(x, axis=1) * (1 + 1e-12))

    def test_dimension_mismatch(self):
        enc = RandomProjectionEncoder(4, 2)
        with pytest.raises(ValidationError):
            enc.encode(np.ones(5))
        with pytest.raises(ValidationError):
            RandomProjectionEncoder(3, 5, orthonormal=True)


class TestOneHot:
    def test_basis(self):
        np.testing.assert_array_equal(one_hot_encode(0, 3), [1.0, 0.0, 0.0])
        with pytest.raises(ValidationError):
            one_hot_encode(3, 3)
        with pytest.raises(ValidationError):
            one_hot_encode(-1, 3)

    def test_pairwise_sqrt2(self):
        e = state_embeddings(6, "one_hot")
        d = np.linalg.norm(e[:, None] - e[None], axis=-1)
        np.testing.assert_allclose(d[~np.eye(6, dtype=bool)], math.sqrt(2))

    def test_projected_distinct(self):
        for seed in range(100):
            e = state_embeddings(25, "projected", embed_dim=8, seed=seed)
            d = np.linalg.norm(e[:, None] - e[None], axis=-1)
            assert d[~np.eye(25, dtype=bool)].min() > 0

    def test_kinds(self):
        np.testing.assert_array_equal(state_embeddings(2, "coordinates", cells=[(0, 1), (2, 3)]),
                                      [[0, 1], [2, 3]])
        with pytest.raises(ValidationError):
            state_embeddings(2, "coordinates")
        with pytest.raises(ValidationError):
            state_embeddings(2, "pixels")


class TestEpisodicMemory:
    def test_exact_copies(self):
        for k in (1, 4, 9):
            mem = EpisodicMemory(3, k=k, c=0.0)
            e = np.array([1.0, 2.0, 3.0])
            for _ in range(k):
                mem.add(e)
            assert episodic_pseudo_count(mem, e) == pytest.approx(1 / math.sqrt(k))

    def test_far_query(self):
        mem = EpisodicMemory(2, k=3, c=1e-3)
        for p in ([0, 0], [0, 0.1], [0.1, 0], [0.1, 0.1]):
            mem.add(p)
        for p in ([0.05, 0.05], [0.0, 0.05]):
            mem.pseudo_count(p)  # establish the distance scale
        r = mem.reward(np.array([1e4, 1e4]))
        assert r == pytest.approx(1 / 1e-3, rel=1e-3)

    def test_empty_memory(self):
        assert EpisodicMemory(2, c=0.0, max_reward=50.0).reward(np.zeros(2)) == 50.0
        assert EpisodicMemory(2, c=0.25).reward(np.zeros(2)) == pytest.approx(4.0)

    def test_monotone_on_repeats(self, rng):
        mem = EpisodicMemory(4, k=5, c=1e-3)
        for p in rng.normal(size=(6, 4)):
            mem.add(p)
        e = rng.normal(size=4)
        rewards = []
        for _ in range(12):
            rewards.append(mem.reward(e))
            mem.add(e)
        assert all(b <= a + 1e-12 for a, b in zip(rewards, rewards[1:]))

    def test_reset_and_capacity(self, rng):
        mem = EpisodicMemory(2, capacity=3, k=2)
        for p in rng.normal(size=(5, 2)):
            mem.add(p)
        assert len(mem) == 3
        mem.pseudo_count(np.zeros(2))
        mem.reset()
        assert len(mem) == 0 and mem._dist_count == 0

    @given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 8))
    def test_knn_matches_brute_force(self, seed, n, k):
        rng = np.random.default_rng(seed)
        pts = rng.integers(0, 3, size=(n, 2)).astype(float)
        mem = EpisodicMemory(2, k=k)
        for p in pts:
            mem.add(p)
        q = rng.integers(0, 3, size=2).astype(float)
        brute = np.sort(((pts - q) ** 2).sum(axis=1))[:k]
        np.testing.assert_array_equal(mem.nearest_sq_distances(q), brute)
