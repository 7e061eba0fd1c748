"""Small statistical toolkit for the verification harness."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import kstwo

from .errors import DegenerateVariance

#: null quantile used for default Kolmogorov-Smirnov thresholds
KS_LEVEL = 0.999


def normal_cdf(x):
    """Standard normal CDF through ``erfc`` (accurate in both tails)."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return 0.5 * np.vectorize(math.erfc, otypes=[float])(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def ks_distance(samples, predicted_variance: float) -> float:
    """Sup distance between the empirical CDF and ``Normal(0, predicted_variance)``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 20:
        raise ValueError(f"KS distance needs at least 20 samples, got {n}")
    if not predicted_variance > 0:
        raise DegenerateVariance(f"predicted variance must be positive, got {predicted_variance}")
    F = normal_cdf(x / math.sqrt(predicted_variance))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_threshold(n: int, level: float = KS_LEVEL) -> float:
    """Null quantile of the one-sample KS distance for ``n`` samples."""
    return float(kstwo.ppf(level, n))


def variance_se(x) -> float:
    """Standard error of the sample variance from the fourth central moment."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d**2)
    m4 = np.mean(d**4)
    return float(math.sqrt(max(m4 - m2**2, 0.0) / x.size))


def covariance_se(x, y) -> float:
    """Standard error of the sample covariance (delta method)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = (x - x.mean()) * (y - y.mean())
    return float(p.std(ddof=1) / math.sqrt(x.size))


def mean_se(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size))


def correlation(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
