"""Numeric kernels for the battery p-values."""

import math

import numpy as np
from scipy import special, stats


def erfc(x: float) -> float:
    """Complementary error function."""
    return float(special.erfc(x))


def igamc(a: float, x: float) -> float:
    """
    Regularized upper incomplete gamma Q(a, x).

    Q(a, 0) = 1 and Q(a, inf) = 0.
    """
    if a <= 0:
        raise ValueError(f"Q(a, x) requires a > 0, got a={a}")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(special.gammaincc(a, x))


def normal_cdf(x):
    """Standard normal CDF, vectorized."""
    return stats.norm.cdf(x)


def clip_p(p: float) -> float:
    """Clamp rounding noise so a p-value stays inside [0, 1]."""
    return float(np.clip(p, 0.0, 1.0))
