import math
from collections import Counter

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

from rise_explore.entropy import (
    RenyiOrder,
    SmoothedEntropyParams,
    action_entropy,
    dispersion,
    gaussian_renyi_entropy,
    gaussian_shannon_entropy,
    knn_renyi_estimate,
    knn_renyi_particle_terms,
    knn_renyi_statistic,
    knn_shannon_estimate,
    knn_shannon_terms,
    renyi_constant,
    renyi_entropy_discrete,
    search_k,
    search_k_subsets,
    shannon_entropy_discrete,
    smoothed_renyi,
    smoothed_renyi_gradient,
)
from rise_explore.errors import ValidationError
from rise_explore.knn import knn_distance_table, knn_distances, kth_neighbor_distance
from rise_explore.special import EULER_GAMMA, digamma, gamma, log_gamma, unit_ball_volume

mpmath.mp.dps = 40

simplex = st.integers(2, 12).flatmap(
    lambda n: st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n)
).map(lambda w: np.array(w) / np.sum(w))


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


class TestSpecial:
    def test_identities(self):
        assert gamma(1.0) == pytest.approx(1.0, rel=1e-14)
        assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
        assert gamma(5.0) == pytest.approx(24.0, rel=1e-14)
        assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-12)
        assert EULER_GAMMA == pytest.approx(float(mpmath.euler), abs=1e-16)

    def test_gamma_3_9(self):
        assert gamma(3.9) == pytest.approx(float(mpmath.gamma(mpmath.mpf("3.9"))), rel=1e-10)

    @given(st.floats(0.5, 30.0))
    def test_against_mpmath(self, x):
        assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-10)
        assert log_gamma(x) == pytest.approx(float(mpmath.loggamma(x)), rel=1e-10, abs=1e-12)
        assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), abs=1e-8)

    @pytest.mark.parametrize("x", [0.0, -1.0, -2.5])
    def test_domain(self, x):
        with pytest.raises(ValidationError):
            gamma(x)
        with pytest.raises(ValidationError):
            digamma(x)

    def test_ball_volumes(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-14)
        assert unit_ball_volume(1) == pytest.approx(2.0, rel=1e-14)


class TestDiscrete:
    def test_shannon_examples(self):
        assert shannon_entropy_discrete([0, 1, 0]) == 0.0
        assert shannon_entropy_discrete(np.full(7, 1 / 7)) == pytest.approx(math.log(7))
        assert shannon_entropy_discrete([0.1, 0.2, 0.3, 0.4]) == pytest.approx(1.2799, abs=5e-5)

    def test_action_entropy_two_decimals(self):
        assert round(action_entropy([0.1, 0.2, 0.3, 0.4]), 2) == 1.28
        assert round(action_entropy([0.25] * 4), 2) == 1.39
        assert action_entropy([0.0, 1.0, 0.0]) == 0.0

    def test_renyi_examples(self):
        assert renyi_entropy_discrete(np.full(5, 0.2), 0.3) == pytest.approx(math.log(5))
        assert renyi_entropy_discrete(np.full(5, 0.2), 3.0) == pytest.approx(math.log(5))
        assert renyi_entropy_discrete([1.0, 0.0], 0.5) == 0.0
        assert renyi_entropy_discrete([0.5, 0.5], 2.0) == pytest.approx(0.6931, abs=5e-5)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5, float("nan")])
    def test_order_rejected(self, alpha):
        with pytest.raises(ValidationError):
            RenyiOrder(alpha)
        with pytest.raises(ValidationError):
            renyi_entropy_discrete([0.5, 0.5], alpha)

    def test_not_a_distribution(self):
        with pytest.raises(ValidationError):
            shannon_entropy_discrete([0.5, 0.6])

    @given(simplex)
    def test_shannon_limit(self, d):
        h = shannon_entropy_discrete(d)
        for a in (1 - 1e-4, 1 + 1e-4):
            assert abs(renyi_entropy_discrete(d, a) - h) <= 1e-3

    @given(simplex, st.floats(0.05, 5.0), st.floats(0.05, 5.0))
    def test_non_increasing_in_alpha(self, d, a1, a2):
        if abs(a1 - 1) < 1e-3 or abs(a2 - 1) < 1e-3 or a1 == a2:
            return
        lo, hi = sorted((a1, a2))
        assert renyi_entropy_discrete(d, lo) >= renyi_entropy_discrete(d, hi) - 1e-12

    @given(simplex, st.randoms(use_true_random=False))
    def test_permutation_invariance(self, d, rnd):
        perm = list(range(len(d)))
        rnd.shuffle(perm)
        p = d[perm]
        assert shannon_entropy_discrete(p) == pytest.approx(shannon_entropy_discrete(d), abs=1e-12)
        assert renyi_entropy_discrete(p, 0.4) == pytest.approx(renyi_entropy_discrete(d, 0.4), abs=1e-12)
        params = SmoothedEntropyParams(0.5, 0.01)
        assert smoothed_renyi(p, params) == pytest.approx(smoothed_renyi(d, params), abs=1e-12)

    @pytest.mark.parametrize("alpha", [None, 0.5, 2.0])
    def test_uniform_is_maximiser(self, alpha):
        """Projected-gradient-free check: maximise over a softmax parametrisation."""
        n = 5
        f = shannon_entropy_discrete if alpha is None else (lambda p: renyi_entropy_discrete(p, alpha))

        def neg(z):
            p = np.exp(z - z.max())
            return -f(p / p.sum())

        best = minimize(neg, np.random.default_rng(1).normal(size=n), method="Nelder-Mead",
                        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20_000})
        assert -best.fun == pytest.approx(math.log(n), abs=1e-6)
        rng = np.random.default_rng(2)
        for _ in range(200):
            assert f(random_simplex(rng, n)) <= math.log(n) + 1e-12


class TestSmoothed:
    def test_worked_value(self):
        p = SmoothedEntropyParams(0.5, 0.01)
        assert smoothed_renyi([1.0, 0.0, 0.0], p) == pytest.approx(2.409975, abs=1e-6)
        assert p.beta == pytest.approx(0.5 * 0.01 ** -1.5)

    def test_sigma_limit(self, rng):
        d = random_simplex(rng, 6)
        p = SmoothedEntropyParams(0.3, 1e-12)
        assert smoothed_renyi(d, p) == pytest.approx(np.sum(d ** 0.3) / 0.7, abs=1e-6)

    def test_params_checked(self):
        for a, s in ((1.0, 0.1), (0.0, 0.1), (1.5, 0.1), (0.5, 0.0)):
            with pytest.raises(ValidationError):
                SmoothedEntropyParams(a, s)

    def test_gradient_uniform(self):
        g = smoothed_renyi_gradient(np.full(4, 0.25), SmoothedEntropyParams(0.5, 0.1))
        assert np.all(g == g[0])

    @given(simplex, st.floats(0.05, 0.95), st.floats(1e-3, 1.0))
    def test_gradient_formula(self, d, a, s):
        p = SmoothedEntropyParams(a, s)
        g = smoothed_renyi_gradient(d, p)
        np.testing.assert_allclose(g, a / (1 - a) * (d + s) ** (a - 1), rtol=1e-12)
        assert np.all(g > 0)
        order = np.argsort(d, kind="stable")
        assert np.all(np.diff(g[order]) <= 0)

    def test_gradient_finite_differences(self, rng):
        h = 1e-6
        for _ in range(200):
            n = int(rng.integers(2, 10))
            d = random_simplex(rng, n)
            p = SmoothedEntropyParams(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.01, 0.5)))
            fd = np.empty(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = h
                # the function is defined on the positive orthant
                fd[i] = (np.sum((d + e + p.sigma) ** p.alpha) - np.sum((d - e + p.sigma) ** p.alpha)) \
                    / (2 * h * (1 - p.alpha))
            np.testing.assert_allclose(smoothed_renyi_gradient(d, p), fd, rtol=1e-5)

    def test_gradient_lipschitz_sweep(self, rng):
        p = SmoothedEntropyParams(0.5, 0.01)
        violations = 0
        for _ in range(1000):
            n = int(rng.integers(2, 12))
            d1, d2 = random_simplex(rng, n), random_simplex(rng, n)
            lhs = np.max(np.abs(smoothed_renyi_gradient(d1, p) - smoothed_renyi_gradient(d2, p)))
            violations += lhs > p.beta * np.max(np.abs(d1 - d2)) * (1 + 1e-12)
        assert violations == 0


def uniform_square(n, seed):
    return np.random.default_rng(seed).random((n, 2))


class TestKnn:
    @given(st.integers(0, 2**32 - 1), st.integers(5, 60), st.integers(1, 4), st.integers(1, 4))
    def test_backends_agree(self, seed, n, m, k):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 4, size=(n, m)).astype(float)  # lots of exact ties
        if k >= n:
            return
        a = knn_distances(x, k, "brute")
        b = knn_distances(x, k, "kdtree")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
        np.testing.assert_allclose(knn_distance_table(x, k)[:, k - 1], a, rtol=1e-12, atol=0)

    def test_brute_matches_sorting(self, rng):
        x = rng.normal(size=(40, 3))
        full = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
        full[np.arange(40), np.arange(40)] = np.inf
        np.testing.assert_allclose(knn_distances(x, 4, "brute"), np.sort(full, axis=1)[:, 3])
        assert kth_neighbor_distance(x[0], x[1:], 4) == pytest.approx(np.sort(full[0])[3])

    def test_errors(self):
        with pytest.raises(ValidationError):
            knn_distances(np.zeros((3, 2)), 3)
        with pytest.raises(ValidationError):
            knn_distances(np.zeros((3, 2)), 1, backend="ball")
        with pytest.raises(ValidationError):
            kth_neighbor_distance(np.zeros(2), np.zeros((3, 3)), 1)


class TestEstimators:
    def test_renyi_constant(self):
        assert renyi_constant(1, 0.5) == pytest.approx(4 / math.pi, rel=1e-12)
        k, a = 4, 0.3
        ref = (mpmath.gamma(k) / mpmath.gamma(k + 1 - a)) ** (1 / (1 - a))
        assert renyi_constant(k, a) == pytest.approx(float(ref), rel=1e-12)

    def test_shannon_uniform_square(self):
        assert abs(knn_shannon_estimate(uniform_square(5000, 0), k=3)) <= 0.1

    def test_shannon_scaling(self):
        x = uniform_square(5000, 1)
        h = knn_shannon_estimate(x, k=3)
        for c in (0.1, 3.0, 50.0):
            assert knn_shannon_estimate(c * x, k=3) - h == pytest.approx(2 * math.log(c), abs=0.05)

    def test_proportional_form(self):
        x = uniform_square(300, 2)
        terms = knn_shannon_terms(x, k=2)
        np.testing.assert_allclose(terms, np.log(knn_distances(x, 2)))

    def test_duplicates_floor(self):
        x = np.zeros((10, 2))
        h = knn_shannon_estimate(x, k=2)
        assert np.isfinite(h) and h < -50
        assert np.isfinite(knn_renyi_estimate(x, 0.5, k=2))
        assert np.all(knn_renyi_particle_terms(x, 0.5, k=2) == 0.0)

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            knn_shannon_estimate(np.zeros((3, 2)), k=3)
        with pytest.raises(ValidationError):
            knn_renyi_estimate(np.zeros((1, 2)), 0.5, k=1)

    def test_renyi_uniform_square(self):
        assert abs(knn_renyi_estimate(uniform_square(5000, 0), 0.5, k=3)) <= 0.1

    def test_renyi_statistic_transform(self, rng):
        x = rng.normal(size=(400, 3))
        stat = knn_renyi_statistic(x, 0.6, k=2)
        assert knn_renyi_estimate(x, 0.6, k=2) == pytest.approx(math.log(stat) / 0.4, rel=1e-12)

    def test_renyi_statistic_direct(self, rng):
        x = rng.normal(size=(200, 2))
        n, k, a = 200, 3, 0.5
        rho = knn_distances(x, k)
        direct = np.mean(((n - 1) * math.pi * renyi_constant(k, a) * rho ** 2) ** (1 - a))
        assert knn_renyi_statistic(x, a, k) == pytest.approx(direct, rel=1e-12)
        np.testing.assert_allclose(knn_renyi_particle_terms(x, a, k), rho ** 0.5)

    def test_high_dimensional_one_hot(self):
        x = np.eye(60)[np.random.default_rng(0).integers(0, 60, 500)]
        assert np.isfinite(knn_renyi_estimate(x, 0.5, k=5))

    def test_gaussian_closed_forms(self):
        # numerical integration of -log f and f^alpha in one dimension
        f = lambda t: mpmath.npdf(t)
        h = mpmath.quad(lambda t: -f(t) * mpmath.log(f(t)), [-mpmath.inf, mpmath.inf])
        assert gaussian_shannon_entropy(1) == pytest.approx(float(h), rel=1e-12)
        a = 0.5
        r = mpmath.log(mpmath.quad(lambda t: f(t) ** a, [-mpmath.inf, mpmath.inf])) / (1 - a)
        assert gaussian_renyi_entropy(1, a) == pytest.approx(float(r), rel=1e-12)
        assert gaussian_renyi_entropy(2, a) == pytest.approx(2 * float(r), rel=1e-12)


class TestSearchK:
    def test_dispersion(self):
        assert dispersion([1.0, 2.0, 3.0]) == pytest.approx(1.0, rel=1e-9)
        assert dispersion([-1.0, 1.0]) == 2.0
        assert dispersion([0.5, 0.5]) == 0.0

    def test_identical_subsets_pick_one(self, rng):
        sub = rng.random((100, 2))
        res = search_k_subsets([sub] * 4, k_max=6, alpha=0.5)
        assert res.k == 1
        assert np.all(res.dispersions == 0.0)

    def test_table_matches_direct(self, rng):
        subs = np.array_split(rng.random((800, 2)), 4)
        res = search_k_subsets(subs, k_max=5, alpha=0.3)
        for k in range(1, 6):
            for j, s in enumerate(subs):
                assert res.estimates[k - 1, j] == pytest.approx(knn_renyi_estimate(s, 0.3, k), rel=1e-12)
        assert res.k == int(np.argmin(res.dispersions)) + 1

    def test_seeded(self):
        x = uniform_square(2000, 3)
        assert search_k(x, 4, 8, 0.5, rng=11).k == search_k(x, 4, 8, 0.5, rng=11).k

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            search_k(np.zeros((50, 2)), n_subsets=8, k_max=15)
        with pytest.raises(ValidationError):
            search_k(np.zeros((500, 2)), n_subsets=1, k_max=3)

    @pytest.mark.xfail(strict=True, reason="the spread/|mean| dispersion is noise-dominated for a "
                       "zero-entropy target, so the argmin wanders over the flat tail of k")
    def test_stability_over_reshuffles(self):
        x = uniform_square(10_000, 0)
        ks = [search_k(x, 8, 15, 0.5, rng=s).k for s in range(10)]
        assert Counter(ks).most_common(1)[0][1] >= 7
