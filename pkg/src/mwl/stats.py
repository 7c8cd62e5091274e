"""Distribution-free and batch-means statistics used by the convergence lab."""
from __future__ import annotations

import math

import numpy as np

from .errors import EmptySample


def ks_distance(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of ``samples`` and ``cdf``.

    ``cdf`` must accept a sorted float array.  Ties are handled correctly
    because the sup is taken on both sides of every jump.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySample("ks_distance needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def dkw_bound(n: int, alpha: float = 0.01) -> float:
    """Dvoretzky-Kiefer-Wolfowitz radius: ``P(KS > radius) <= alpha``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def batch_means(x, batches: int = 20) -> tuple[float, float]:
    """Mean of a serially dependent sequence and its batch-means standard error.

    The sequence is cut into ``batches`` contiguous blocks of (nearly) equal
    length; the error is the standard deviation of the block means over
    ``sqrt(batches)``.
    """
    x = np.asarray(x, dtype=float)
    if x.size < batches:
        raise EmptySample(f"need at least {batches} observations, got {x.size}")
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def within_se(value: float, target: float, se: float, band: float = 3.0) -> bool:
    if not np.isfinite(se):
        return False
    if se == 0.0:
        return abs(value - target) <= 1e-12
    return abs(value - target) <= band * se
