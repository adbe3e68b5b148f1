"""Entropies of discrete distributions and k-NN estimators for samples in R^m.

Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .knn import knn_distance_table, knn_distances
from .mdp import StateDistribution
from .rng import as_rng
from .special import digamma, log_gamma, log_unit_ball_volume

# floor applied to k-NN distances before taking logarithms or powers
MIN_DISTANCE = 1e-12


@dataclass(frozen=True)
class RenyiOrder:
    alpha: float

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if not math.isfinite(a) or a <= 0 or a == 1.0:
            raise ValidationError(f"Renyi order must lie in (0,1) or (1,inf), got {a}")
        object.__setattr__(self, "alpha", a)

    def __float__(self) -> float:
        return self.alpha


def _alpha(alpha) -> float:
    return RenyiOrder(float(alpha)).alpha


@dataclass(frozen=True)
class SmoothedEntropyParams:
    alpha: float
    sigma: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("smoothed entropy needs alpha in (0, 1)")
        if not self.sigma > 0.0:
            raise ValidationError("sigma must be positive")

    @property
    def beta(self) -> float:
        """Smoothness constant alpha * sigma^(alpha - 2)."""
        return self.alpha * self.sigma ** (self.alpha - 2.0)

    @property
    def gradient_bound(self) -> float:
        """Sup-norm bound alpha/(1-alpha) * sigma^(alpha-1) on the gradient."""
        return self.alpha / (1.0 - self.alpha) * self.sigma ** (self.alpha - 1.0)


def _probs(d) -> np.ndarray:
    if isinstance(d, StateDistribution):
        return d.probs
    p = np.asarray(d, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("expected a probability vector")
    return p


def shannon_entropy_discrete(d) -> float:
    """-sum p log p with 0 log 0 = 0."""
    p = _probs(d)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def action_entropy(policy_row) -> float:
    return shannon_entropy_discrete(policy_row)


def renyi_entropy_discrete(d, alpha) -> float:
    a = _alpha(alpha)
    p = _probs(d)
    nz = p[p > 0]
    return float(np.log(np.sum(nz ** a)) / (1.0 - a))


def smoothed_renyi(d, params: SmoothedEntropyParams) -> float:
    """(1/(1-alpha)) * sum_s (d(s) + sigma)^alpha."""
    p = _probs(d)
    return float(np.sum((p + params.sigma) ** params.alpha) / (1.0 - params.alpha))


def smoothed_renyi_gradient(d, params: SmoothedEntropyParams) -> np.ndarray:
    p = _probs(d)
    a = params.alpha
    return a / (1.0 - a) * (p + params.sigma) ** (a - 1.0)


# ---------------------------------------------------------------------------
# k-NN estimators


def _sample_points(points, k: int) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or len(x) < 2:
        raise ValidationError("need an (N, m) sample with N >= 2")
    if k < 1 or len(x) < k + 1:
        raise ValidationError(f"need at least k+1={k + 1} points, got {len(x)}")
    return x


def knn_shannon_terms(points, k: int = 3, backend: str = "auto") -> np.ndarray:
    """log ||x_i - x~_i|| for each point (the proportional form's summands)."""
    x = _sample_points(points, k)
    return np.log(np.maximum(knn_distances(x, k, backend), MIN_DISTANCE))


def knn_shannon_estimate(points, k: int = 3, backend: str = "auto") -> float:
    """Singh-style k-NN estimate of differential Shannon entropy:

        (1/N) sum_i log[N V_m rho_i^m / k] + log k - psi(k)
    """
    x = _sample_points(points, k)
    n, m = x.shape
    log_rho = knn_shannon_terms(x, k, backend)
    # the -log k inside the sum cancels the +log k outside
    return float(math.log(n) + log_unit_ball_volume(m) + m * log_rho.mean() - digamma(k))


def renyi_constant(k: int, alpha: float) -> float:
    """C_k = [Gamma(k) / Gamma(k + 1 - alpha)]^(1/(1-alpha))."""
    a = _alpha(alpha)
    if k + 1 - a <= 0:
        raise ValidationError("k + 1 - alpha must be positive")
    return math.exp((log_gamma(k) - log_gamma(k + 1 - a)) / (1.0 - a))


def _log_renyi_terms(points, alpha: float, k: int, backend: str, rho=None) -> np.ndarray:
    x = _sample_points(points, k)
    n, m = x.shape
    if rho is None:
        rho = knn_distances(x, k, backend)
    rho = np.maximum(rho, MIN_DISTANCE)
    log_zeta = (math.log(n - 1) + log_unit_ball_volume(m)
                + math.log(renyi_constant(k, alpha)) + m * np.log(rho))
    return (1.0 - alpha) * log_zeta


def knn_renyi_statistic(points, alpha, k: int = 3, backend: str = "auto") -> float:
    """Sample-mean statistic (1/N) sum_i [(N-1) V_m C_k rho_i^m]^(1-alpha)."""
    a = _alpha(alpha)
    return float(np.mean(np.exp(_log_renyi_terms(points, a, k, backend))))


def knn_renyi_estimate(points, alpha, k: int = 3, backend: str = "auto") -> float:
    """Consistent Renyi entropy estimate log(statistic) / (1 - alpha).

    Evaluated in log space, so high-dimensional samples with tiny distances
    do not underflow.
    """
    a = _alpha(alpha)
    return _renyi_from_terms(_log_renyi_terms(points, a, k, backend), a)


def _renyi_from_terms(t: np.ndarray, a: float) -> float:
    return float((logsumexp(t) - math.log(len(t))) / (1.0 - a))


def knn_renyi_particle_terms(points, alpha, k: int = 3, backend: str = "auto") -> np.ndarray:
    """Per-point proportional form ||y_i - y~_i||^(1-alpha); 0 for duplicates."""
    a = _alpha(alpha)
    x = _sample_points(points, k)
    return knn_distances(x, k, backend) ** (1.0 - a)


# ---------------------------------------------------------------------------
# k-value search


def dispersion(values) -> float:
    """Spread of subset estimates: (max - min) / |mean|, or max - min near 0."""
    v = np.asarray(values, dtype=float)
    spread = float(v.max() - v.min())
    mean = abs(float(v.mean()))
    if mean < 1e-9:
        return spread
    return spread / (mean + 1e-12)


@dataclass(frozen=True)
class KSearchResult:
    k: int
    dispersions: np.ndarray
    estimates: np.ndarray  # (k_max, n_subsets)


def search_k_subsets(subsets, k_max: int, alpha) -> KSearchResult:
    """Pick the k in [1, k_max] whose per-subset estimates agree best."""
    a = _alpha(alpha)
    if len(subsets) < 2:
        raise ValidationError("need at least two subsets")
    if k_max < 1 or min(len(s) for s in subsets) < k_max + 1:
        raise ValidationError("every subset needs at least k_max + 1 points")
    est = np.empty((k_max, len(subsets)))
    for j, sub in enumerate(subsets):
        table = knn_distance_table(sub, k_max)
        for k in range(1, k_max + 1):
            est[k - 1, j] = _renyi_from_terms(_log_renyi_terms(sub, a, k, "", table[:, k - 1]), a)
    deltas = np.array([dispersion(row) for row in est])
    return KSearchResult(int(np.argmin(deltas)) + 1, deltas, est)


def search_k(points, n_subsets: int = 8, k_max: int = 15, alpha=0.1,
             rng: np.random.Generator | int | None = 0) -> KSearchResult:
    """Split the sample into ``n_subsets`` random parts (seeded) and search k."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if n_subsets < 2:
        raise ValidationError("need at least two subsets")
    if len(x) < n_subsets * (k_max + 1):
        raise ValidationError(f"need at least {n_subsets * (k_max + 1)} samples, got {len(x)}")
    perm = as_rng(rng).permutation(len(x))
    return search_k_subsets(np.array_split(x[perm], n_subsets), k_max, alpha)


# ---------------------------------------------------------------------------
# closed forms used as references


def gaussian_shannon_entropy(dim: int) -> float:
    """Differential entropy of N(0, I_dim): (dim/2) log(2 pi e)."""
    return 0.5 * dim * math.log(2.0 * math.pi * math.e)


def gaussian_renyi_entropy(dim: int, alpha) -> float:
    """Renyi entropy of N(0, I_dim): (dim/2) log(2 pi) + (dim/2) log(alpha)/(alpha - 1)."""
    a = _alpha(alpha)
    return 0.5 * dim * (math.log(2.0 * math.pi) + math.log(a) / (a - 1.0))
