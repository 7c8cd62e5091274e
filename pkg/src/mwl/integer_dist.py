"""Finite probability mass functions on the integers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidPMF, JumpOverMembrane, NonZeroMean, ZeroVariance

PROB_TOL = 1e-12


@dataclass(frozen=True)
class IntegerPMF:
    """Immutable finite law on the integers.

    Atoms are stored sorted by value with strictly positive probabilities
    summing to one within ``PROB_TOL``.  Use :meth:`from_pairs` or
    :meth:`from_dict` rather than the raw constructor when the input may be
    unsorted.
    """

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise InvalidPMF("a pmf needs at least one atom")
        if len(self.values) != len(self.probs):
            raise InvalidPMF("values and probs differ in length")
        vals = tuple(int(v) for v in self.values)
        if any(float(v) != int(v) for v in self.values):
            raise InvalidPMF("values must be integers")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InvalidPMF("values must be strictly increasing")
        probs = tuple(float(p) for p in self.probs)
        if any(not (0.0 < p <= 1.0) for p in probs):
            raise InvalidPMF("every probability must lie in (0, 1]")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise InvalidPMF(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "IntegerPMF":
        """Build from ``[value, prob]`` pairs; duplicate values are merged."""
        acc: dict[int, float] = {}
        for v, p in pairs:
            if float(v) != int(v):
                raise InvalidPMF(f"non-integer value {v!r}")
            acc[int(v)] = acc.get(int(v), 0.0) + float(p)
        acc = {v: p for v, p in acc.items() if p != 0.0}
        keys = sorted(acc)
        return cls(tuple(keys), tuple(acc[k] for k in keys))

    @classmethod
    def from_dict(cls, mapping: Mapping) -> "IntegerPMF":
        return cls.from_pairs(mapping.items())

    @classmethod
    def point(cls, value: int) -> "IntegerPMF":
        return cls((int(value),), (1.0,))

    def to_pairs(self) -> list[list]:
        return [[v, p] for v, p in zip(self.values, self.probs)]

    def __len__(self):
        return len(self.values)

    # moments ---------------------------------------------------------------

    def support(self) -> tuple[int, ...]:
        return self.values

    def prob(self, value: int) -> float:
        try:
            return self.probs[self.values.index(int(value))]
        except ValueError:
            return 0.0

    def mean(self) -> float:
        return math.fsum(p * v for v, p in zip(self.values, self.probs))

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum(p * (v - mu) ** 2 for v, p in zip(self.values, self.probs))

    def abs_mean(self) -> float:
        return math.fsum(p * abs(v) for v, p in zip(self.values, self.probs))

    def max_abs(self) -> int:
        return max(abs(self.values[0]), abs(self.values[-1]))

    def negated(self) -> "IntegerPMF":
        return IntegerPMF(tuple(-v for v in reversed(self.values)), tuple(reversed(self.probs)))

    def shifted(self, k: int) -> "IntegerPMF":
        return IntegerPMF(tuple(v + int(k) for v in self.values), self.probs)

    # sampling --------------------------------------------------------------

    @cached_property
    def alias_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vose alias table ``(values, cutoff, alias)`` for O(1) draws."""
        return alias_setup(np.asarray(self.values, dtype=np.int64), np.asarray(self.probs))

    def sample_from_uniform(self, u: float) -> int:
        """Map one uniform on [0, 1) to a draw through the alias table."""
        vals, cut, alias = self.alias_table
        k = len(vals)
        scaled = u * k
        idx = min(int(scaled), k - 1)
        if scaled - idx < cut[idx]:
            return int(vals[idx])
        return int(vals[alias[idx]])

    def sample(self, rng: np.random.Generator) -> int:
        return self.sample_from_uniform(rng.random())

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        vals, cut, alias = self.alias_table
        k = len(vals)
        scaled = rng.random(size) * k
        idx = np.minimum(scaled.astype(np.int64), k - 1)
        keep = (scaled - idx) < cut[idx]
        return np.where(keep, vals[idx], vals[alias[idx]])


def alias_setup(values: np.ndarray, probs: np.ndarray):
    """Vose's alias method.

    Returns ``(values, cutoff, alias)`` where column ``i`` yields
    ``values[i]`` with probability ``cutoff[i]`` and ``values[alias[i]]``
    otherwise.
    """
    k = len(probs)
    q = np.asarray(probs, dtype=float) * k
    alias = np.arange(k, dtype=np.int64)
    cutoff = np.ones(k)
    small = [i for i in range(k) if q[i] < 1.0]
    large = [i for i in range(k) if q[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        cutoff[s] = q[s]
        alias[s] = g
        q[g] = q[g] + q[s] - 1.0
        if q[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers are 1 up to rounding
    for i in small + large:
        cutoff[i] = 1.0
    return np.asarray(values, dtype=np.int64), cutoff, alias


@dataclass(frozen=True)
class StepLaw:
    pmf: IntegerPMF
    sigma2: float
    max_jump: int


def validate_step_law(pmf: IntegerPMF, m: int) -> StepLaw:
    """Check that ``pmf`` is a legal free-step law for membrane half-width ``m``."""
    if int(m) < 0:
        raise ValueError("membrane half-width must be nonnegative")
    mu = pmf.mean()
    if abs(mu) > PROB_TOL:
        raise NonZeroMean(f"step law has mean {mu!r}")
    var = pmf.variance()
    if not var > 0.0:
        raise ZeroVariance("step law is degenerate")
    if pmf.max_abs() > 2 * m + 1:
        raise JumpOverMembrane(
            f"step law reaches {pmf.max_abs()} > 2m+1 = {2 * m + 1}"
        )
    return StepLaw(pmf, var, pmf.max_abs())


def truncate_tail(pmf: IntegerPMF, eps: float) -> tuple[IntegerPMF, float]:
    """Drop the largest symmetric tail ``{|v| > K}`` whose mass is at most ``eps``.

    ``K`` is the smallest cut level for which the removed mass does not
    exceed ``eps``; the kept atoms are renormalized.  Returns the new pmf
    and the exact removed mass.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    absvals = sorted({abs(v) for v in pmf.values})
    for cut in [0] + absvals:
        lost = math.fsum(p for v, p in zip(pmf.values, pmf.probs) if abs(v) > cut)
        if lost <= eps:
            break
    if lost == 0.0:
        return pmf, 0.0
    kept = [(v, p) for v, p in zip(pmf.values, pmf.probs) if abs(v) <= cut]
    total = math.fsum(p for _, p in kept)
    return IntegerPMF(tuple(v for v, _ in kept), tuple(p / total for _, p in kept)), lost
