import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rise_explore.bandit import (
    CSV_COLUMNS,
    BanditState,
    BernoulliBandit,
    GaussianBandit,
    StrategyConfig,
    boltzmann_probs,
    epsilon_greedy_probs,
    run_bandit,
    sample_beta,
    select_epsilon_greedy,
    select_ucb,
    thompson_step,
    ucb_indices,
    write_bandit_csv,
)
from rise_explore.errors import UnsupportedError, ValidationError
from rise_explore.rng import make_rng

ARMS = tuple(np.arange(1, 10) / 10)


def state_with(q, counts):
    st_ = BanditState(len(q))
    st_.q = np.array(q, dtype=float)
    st_.count = np.array(counts)
    st_.t = int(sum(counts))
    return st_


class TestEpsilonGreedy:
    def test_greedy_limit(self, rng):
        s = state_with([0.1, 0.7, 0.7, 0.2], [1, 1, 1, 1])
        assert {select_epsilon_greedy(s, 0.0, rng) for _ in range(50)} == {1}

    def test_uniform_limit(self):
        np.testing.assert_allclose(epsilon_greedy_probs([3.0, 1.0, 2.0, 0.0], 1.0), 0.25)

    def test_formula_and_monte_carlo(self):
        q = [0.2, 0.9, 0.1, 0.4]
        p = epsilon_greedy_probs(q, 0.1)
        np.testing.assert_allclose(p, [0.025, 0.925, 0.025, 0.025])
        s = state_with(q, [1, 1, 1, 1])
        rng = make_rng(0)
        draws = np.array([select_epsilon_greedy(s, 0.1, rng) for _ in range(1_000_000)])
        freq = np.bincount(draws, minlength=4) / len(draws)
        assert np.max(np.abs(freq - p)) < 0.005

    def test_bad_epsilon(self, rng):
        with pytest.raises(ValidationError):
            select_epsilon_greedy(BanditState(2), 1.5, rng)


class TestUcb:
    def test_tie_break(self):
        assert select_ucb(state_with([0.5, 0.5, 0.5], [1, 1, 1]), 1.0) == 0

    def test_unpulled_first(self):
        s = state_with([0.9, 0.0, 0.99], [5, 0, 7])
        assert select_ucb(s, 1.0) == 1

    def test_worked_indices(self):
        s = state_with([0.5, 0.6], [10, 2])
        idx = ucb_indices(s, 1.0)
        np.testing.assert_allclose(idx, [0.5 + math.sqrt(math.log(12) / 10), 0.6 + math.sqrt(math.log(12) / 2)])
        assert select_ucb(s, 1.0) == 1

    def test_c_positive(self):
        with pytest.raises(ValidationError):
            ucb_indices(state_with([0.0], [1]), 0.0)


class TestThompson:
    def test_updates(self):
        env = BernoulliBandit((1.0, 0.0))
        s = BanditState(2)
        s.beta[1] = 1e6  # force arm 0
        thompson_step(s, env, make_rng(1))
        np.testing.assert_array_equal(s.alpha, [2.0, 1.0])
        np.testing.assert_array_equal(s.beta, [1.0, 1e6])

        s = BanditState(2)
        s.beta[0] = 1e6  # force arm 1, which pays 0
        thompson_step(s, env, make_rng(1))
        np.testing.assert_array_equal(s.alpha, [1.0, 1.0])
        np.testing.assert_array_equal(s.beta, [1e6, 2.0])

    def test_gaussian_unsupported(self):
        with pytest.raises(UnsupportedError):
            thompson_step(BanditState(1), GaussianBandit((0.0,), (1.0,)), make_rng(0))

    def test_beta_sampler_moments(self):
        rng = make_rng(4)
        a, b = np.full(200_000, 2.0), np.full(200_000, 5.0)
        x = sample_beta(a, b, rng)
        assert x.mean() == pytest.approx(2 / 7, abs=2e-3)
        assert x.var() == pytest.approx(2 * 5 / (49 * 8), abs=1e-3)

    def test_two_arm_preference_and_posterior(self):
        env = BernoulliBandit((0.2, 0.8))
        share, err = [], []
        for seed in range(100):
            h = run_bandit(StrategyConfig("thompson"), env, 10_000, seed)
            share.append(np.mean(h.arms == 1))
            a, b = h.state.alpha[1], h.state.beta[1]
            err.append(abs(a / (a + b) - 0.8))
        assert np.mean(share) > 0.8
        assert np.median(err) <= 0.05


class TestBoltzmann:
    def test_equal_q(self):
        np.testing.assert_allclose(boltzmann_probs([0.3] * 5, 0.7), 0.2)

    def test_high_temperature(self):
        np.testing.assert_allclose(boltzmann_probs([0.1, 0.2, 0.3, 0.4], 1e6), 0.25, atol=1e-6)

    def test_worked_values(self):
        p = boltzmann_probs([0.1, 0.2, 0.3, 0.4], 0.1)
        e = np.exp([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(p, e / e.sum(), rtol=1e-12)
        np.testing.assert_allclose(p, [0.0321, 0.0871, 0.2369, 0.6439], atol=5e-5)

    def test_overflow_safe(self):
        p = boltzmann_probs([1e4, 0.0], 1e-3)
        np.testing.assert_array_equal(p, [1.0, 0.0])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-1e3, 1e3), st.floats(0.05, 100))
    def test_shift_invariance(self, q, c, tau):
        p = boltzmann_probs(q, tau)
        np.testing.assert_allclose(boltzmann_probs(np.array(q) + c, tau), p, atol=1e-9)
        assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)

    def test_bad_tau(self):
        with pytest.raises(ValidationError):
            boltzmann_probs([0.0, 1.0], 0.0)


class TestRunBandit:
    @given(st.lists(st.tuples(st.integers(0, 3), st.floats(-10, 10)), max_size=60))
    def test_incremental_mean(self, pulls):
        s = BanditState(4)
        for arm, r in pulls:
            s.update(arm, r)
        for arm in range(4):
            rs = [r for a, r in pulls if a == arm]
            if rs:
                assert s.q[arm] == pytest.approx(np.mean(rs), abs=1e-12 * max(1, np.max(np.abs(rs))))
        assert s.count.sum() == s.t == len(pulls)

    @pytest.mark.parametrize("name", ["epsilon_greedy", "ucb", "thompson", "boltzmann"])
    def test_single_arm_zero_regret(self, name):
        h = run_bandit(StrategyConfig(name), BernoulliBandit((0.4,)), 200, 1)
        assert np.all(h.regret == 0)

    def test_deterministic_per_seed(self):
        cfg = StrategyConfig("boltzmann", tau=0.2)
        a, b = run_bandit(cfg, BernoulliBandit(ARMS), 500, 3), run_bandit(cfg, BernoulliBandit(ARMS), 500, 3)
        np.testing.assert_array_equal(a.arms, b.arms)
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_greedy_lock_in(self):
        # zero-initialised estimates: arm 0 pays 0 and never falls below the untried arm
        h = run_bandit(StrategyConfig("epsilon_greedy", epsilon=0.0), BernoulliBandit((0.0, 1.0)), 300, 0)
        assert np.all(h.arms == 0)
        assert h.regret[-1] == 300

    def test_regret_ordering(self):
        env = BernoulliBandit(ARMS)
        final = {}
        for cfg in (StrategyConfig("epsilon_greedy", epsilon=0.1), StrategyConfig("ucb", c=1.0),
                    StrategyConfig("thompson")):
            final[cfg.name] = np.mean([run_bandit(cfg, env, 10_000, s).regret[-1] for s in range(20)])
        assert final["ucb"] < final["epsilon_greedy"]
        assert final["thompson"] < final["epsilon_greedy"]

    def test_decaying_epsilon_keeps_exploring(self):
        env = BernoulliBandit(ARMS)
        cfg = StrategyConfig("epsilon_greedy", decay=True)
        ok = sum(run_bandit(cfg, env, 100_000, s).state.count.min() >= 50 for s in range(100))
        assert ok >= 95

    def test_csv(self, tmp_path):
        hs = [run_bandit(StrategyConfig("ucb"), BernoulliBandit((0.2, 0.6)), 30, s) for s in (0, 1)]
        path = tmp_path / "b.csv"
        write_bandit_csv(hs, path)
        rows = list(csv.reader(open(path)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 61
        last = rows[30]
        assert int(last[1]) == 30 and float(last[4]) == pytest.approx(hs[0].rewards.sum())

    def test_validation(self):
        with pytest.raises(ValidationError):
            BernoulliBandit((1.2,))
        with pytest.raises(ValidationError):
            BernoulliBandit(())
        with pytest.raises(ValidationError):
            StrategyConfig("softmax")
        with pytest.raises(ValidationError):
            run_bandit(StrategyConfig("ucb"), BernoulliBandit((0.5,)), 0)

    def test_labels(self):
        assert StrategyConfig("epsilon_greedy", epsilon=0.1).label == "eps-greedy(0.1)"
        assert StrategyConfig("ucb", c=2).label == "UCB(c=2)"
