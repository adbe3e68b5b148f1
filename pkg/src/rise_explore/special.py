"""Gamma-family functions with explicit domain checks (scipy-backed)."""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

from .errors import ValidationError

EULER_GAMMA = 0.57721566490153286061


def _check_positive(x):
    if np.any(np.asarray(x) <= 0):
        raise ValidationError(f"argument must be positive, got {x!r}")


def gamma(x):
    _check_positive(x)
    return float(_sp.gamma(x)) if np.isscalar(x) else _sp.gamma(x)


def log_gamma(x):
    _check_positive(x)
    return float(_sp.gammaln(x)) if np.isscalar(x) else _sp.gammaln(x)


def digamma(x):
    _check_positive(x)
    return float(_sp.digamma(x)) if np.isscalar(x) else _sp.digamma(x)


def unit_ball_volume(m: int) -> float:
    """V_m = pi^(m/2) / Gamma(m/2 + 1)."""
    if m < 1:
        raise ValidationError("dimension must be at least 1")
    return math.exp(0.5 * m * math.log(math.pi) - log_gamma(0.5 * m + 1.0))


def log_unit_ball_volume(m: int) -> float:
    if m < 1:
        raise ValidationError("dimension must be at least 1")
    return 0.5 * m * math.log(math.pi) - log_gamma(0.5 * m + 1.0)
