"""Skew Brownian motion: transition law, samplers and martingale diagnostics.

This module is the independent reference against which the scaled walk is
compared.  It only knows the transition density

    p_t(x, y) = phi_t(x - y) + beta sign(y) phi_t(|x| + |y|)

with ``sign(0) = 0``, and the description of the process as reflected
Brownian motion whose excursions are flipped to the positive side with
probability ``(1 + beta) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import ndtr

from .errors import NonPositiveTime
from .rng import make_rng
from .stats import mean_se
from .walk import SNAP_FIELDS

@dataclass(frozen=True)
class SkewBM:
    """``sigma * W_beta`` started from 0."""

    beta: float
    sigma: float = 1.0

    def __post_init__(self):
        if not -1.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta!r}")
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonPositiveTime("t must be positive")
    return t


def gaussian_density(t, x):
    t = np.asarray(t, dtype=float)
    return np.exp(-np.square(x) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def density(bm: SkewBM, t, x, y):
    """Transition density of ``W_beta`` from ``x`` to ``y`` over time ``t``.

    ``bm.sigma`` is ignored here: densities and CDFs are those of the unit
    process, and callers divide positions by sigma.
    """
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = gaussian_density(t, x - y) + bm.beta * np.sign(y) * gaussian_density(t, np.abs(x) + np.abs(y))
    return out if out.ndim else float(out)


def transition_cdf(bm: SkewBM, t, x, y):
    """``P(W_beta(t) <= y | W_beta(0) = x)``.

    Integrating the density term by term gives, for every ``y``,
    ``Phi((y - x)/sqrt(t)) - beta * Phi(-(|x| + |y|)/sqrt(t))``.
    """
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.sqrt(t)
    out = ndtr((y - x) / s) - bm.beta * ndtr(-(np.abs(x) + np.abs(y)) / s)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def marginal_cdf(bm: SkewBM, t):
    """CDF of ``W_beta(t) / 1`` from the origin, as a one-argument callable."""
    return lambda y: transition_cdf(bm, t, 0.0, y)


def inverse_cdf(bm: SkewBM, t: float, x, u, ptol: float = 1e-12, max_iter: int = 200):
    """Solve ``transition_cdf(t, x, y) = u`` for ``y`` by vectorized bisection."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    x, u = np.broadcast_arrays(x, u)
    half = 10.0 * math.sqrt(t) * (1.0 + abs(bm.beta))
    lo = x - half
    hi = x + half
    width = np.full(x.shape, half)
    while True:
        bad = transition_cdf(bm, t, x, lo) > u
        if not bad.any():
            break
        width = np.where(bad, 2.0 * width, width)
        lo = np.where(bad, x - width, lo)
    width = np.full(x.shape, half)
    while True:
        bad = transition_cdf(bm, t, x, hi) < u
        if not bad.any():
            break
        width = np.where(bad, 2.0 * width, width)
        hi = np.where(bad, x + width, hi)
    mid = 0.5 * (lo + hi)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = transition_cdf(bm, t, x, mid)
        done = np.abs(f - u) <= ptol
        active &= ~done
        if not active.any():
            break
        below = f < u
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    return mid


def sample_path(bm: SkewBM, grid, seed: int, stream: int = 0, paths: int = 1) -> np.ndarray:
    """Exact skeleton of ``sigma * W_beta`` on ``grid`` (which starts at 0).

    Each transition is drawn by inverting :func:`transition_cdf` at a fresh
    uniform.  Returns an array of shape ``(paths, len(grid))``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start at 0")
    rng = make_rng(seed, stream)
    unit = bm if bm.sigma == 1.0 else SkewBM(bm.beta)
    out = np.zeros((paths, grid.size))
    cur = np.zeros(paths)
    for k in range(1, grid.size):
        u = rng.random(paths)
        cur = inverse_cdf(unit, grid[k] - grid[k - 1], cur, u)
        out[:, k] = cur
    if bm.sigma != 1.0:
        out = bm.sigma * out
    return out


@numba.njit(cache=True)
def _reflected_walk(u, idx):
    """Reflected simple walk values and excursion labels at step indices ``idx``."""
    s = 0
    exc = 0
    j = 0
    absval = np.zeros(idx.size, dtype=np.int64)
    label = np.zeros(idx.size, dtype=np.int64)
    while j < idx.size and idx[j] == 0:
        j += 1
    for k in range(u.size):
        if u[k] < 0.5:
            s += 1
        else:
            s -= 1
        if s == 0:
            exc += 1
        step = k + 1
        while j < idx.size and idx[j] == step:
            absval[j] = s if s >= 0 else -s
            label[j] = exc
            j += 1
    return absval, label, exc


def sample_by_excursion_flipping(bm: SkewBM, n: int, grid, seed: int, paths: int = 1) -> np.ndarray:
    """Approximate sampler: flip the excursions of a reflected lattice walk.

    A simple random walk of ``n [t_max]`` steps is reflected; every
    excursion away from 0 is independently sent to the positive side with
    probability ``(1 + beta) / 2`` and the result is scaled by
    ``sigma / sqrt(n)``.  Path ``p`` draws its steps from stream ``2p`` and
    its excursion signs from stream ``2p + 1``, so changing ``beta`` under a
    fixed seed only changes the signs.
    """
    grid = np.asarray(grid, dtype=float)
    idx = np.floor(n * grid + 1e-9).astype(np.int64)
    total = int(idx.max())
    p_plus = 0.5 * (1.0 + bm.beta)
    out = np.zeros((paths, grid.size))
    scale = bm.sigma / math.sqrt(n)
    for p in range(paths):
        u = make_rng(seed, 2 * p).random(total)
        absval, label, count = _reflected_walk(u, idx)
        coins = make_rng(seed, 2 * p + 1).random(count + 1)
        sign = np.where(coins < p_plus, 1.0, -1.0)
        out[p] = sign[label] * absval * scale
    return out


# diagnostics -------------------------------------------------------------


def martingale_diagnostics(batch, n: int, beta: float, sigma2: float, times, pairs=()):
    """Moment checks of the martingale characterization on scaled walk paths.

    ``batch`` is a :class:`mwl.walk.BatchResult` whose checkpoints include
    ``[n t]`` for every ``t`` in ``times`` (positions relative to the
    membrane center).  For each side and time it
    reports the mean and standard error of ``M+-_n(t)``, of
    ``M+-_n(t)**2 - sigma2 * occ+-(t) / n`` (the occupation count of steps
    taken from ``+-X > m``), and of the reconstructed
    ``X+-_n - (1 +- beta)/2 V`` with ``V = 2/(1 +- beta) L+-_n``.  Each
    ``(s, t)`` in ``pairs`` adds the increment ``M+-_n(t) - M+-_n(s)``.
    The localization fraction counts L increments launched from outside
    the membrane.
    """
    steps = list(batch.steps)
    root = math.sqrt(n)

    def col(name, t):
        k = steps.index(int(math.floor(n * t + 1e-9)))
        return batch.snapshots[:, k, SNAP_FIELDS.index(name)].astype(float)

    report = {"n": n, "beta": beta, "sigma2": sigma2, "paths": int(batch.snapshots.shape[0]),
              "times": {}, "increments": {}}
    for t in times:
        entry = {}
        x = col("x", t)
        for side, sgn in (("plus", 1.0), ("minus", -1.0)):
            mart = col(f"M_{side}", t) / root
            occ = col(f"occ_{side}", t) / n
            loc = col(f"L_{side}", t) / root
            part = np.maximum(sgn * x, 0.0) / root
            entry[f"M_{side}"] = mean_se(mart)
            entry[f"qv_{side}"] = mean_se(mart ** 2 - sigma2 * occ)
            entry[f"occupation_{side}"] = mean_se(sigma2 * occ)
            entry[f"mart_recon_{side}"] = mean_se(part - loc)
            if 1.0 + sgn * beta > 0.0:
                entry[f"V_{side}"] = mean_se(2.0 / (1.0 + sgn * beta) * loc)
        report["times"][float(t)] = entry
    for s, t in pairs:
        entry = {}
        for side in ("plus", "minus"):
            entry[f"M_{side}"] = mean_se((col(f"M_{side}", t) - col(f"M_{side}", s)) / root)
        report["increments"][f"{s},{t}"] = entry
    inc = sum(l.L_plus_increments + l.L_minus_increments for l in batch.ledgers)
    bad = sum(l.L_plus_unlocalized + l.L_minus_unlocalized for l in batch.ledgers)
    report["localization_fraction"] = bad / inc if inc else 0.0
    lcols = batch.snapshots[:, :, [SNAP_FIELDS.index("L_plus"), SNAP_FIELDS.index("L_minus")]]
    report["V_nondecreasing"] = bool(np.all(np.diff(lcols, axis=1) >= 0))
    return report

