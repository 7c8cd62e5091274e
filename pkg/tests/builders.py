"""Model builders shared by the test modules."""
from __future__ import annotations

import numpy as np

from mwl import IntegerPMF, WalkModel
from mwl.model import closed_class_check

SIMPLE = IntegerPMF.from_pairs([[-1, 0.5], [1, 0.5]])


def c1(p: float = 0.75) -> WalkModel:
    """m = 0, simple free steps, membrane jump +1 w.p. p and -1 otherwise."""
    eta = IntegerPMF.from_pairs([[-1, 1 - p], [1, p]])
    return WalkModel(0, SIMPLE, {0: eta})


def zero_mean_law(rng: np.random.Generator, reach: int, max_atoms: int = 7) -> IntegerPMF:
    """Random zero-mean law on ``[-reach, reach]`` with at most ``max_atoms`` atoms."""
    budget = max_atoms
    with_zero = reach > 0 and max_atoms >= 3 and rng.random() < 0.3
    if with_zero:
        budget -= 1
    k_pos = int(rng.integers(1, min(reach, budget - 1) + 1))
    k_neg = int(rng.integers(1, min(reach, budget - k_pos) + 1))
    pos = np.sort(rng.choice(np.arange(1, reach + 1), size=k_pos, replace=False))
    neg = -np.sort(rng.choice(np.arange(1, reach + 1), size=k_neg, replace=False))
    a = rng.uniform(0.2, 1.0, size=k_pos)
    b = rng.uniform(0.2, 1.0, size=k_neg)
    a /= a @ pos
    b /= b @ -neg
    weights = {int(v): float(w) for v, w in zip(pos, a)}
    weights.update({int(v): float(w) for v, w in zip(neg, b)})
    if with_zero:
        weights[0] = float(rng.uniform(0.1, 1.0))
    total = sum(weights.values())
    values = sorted(weights)
    probs = np.array([weights[v] / total for v in values])
    return IntegerPMF(tuple(values), tuple(probs / probs.sum()))


def random_law(rng: np.random.Generator, lo: int, hi: int, max_atoms: int = 5) -> IntegerPMF:
    k = int(rng.integers(1, min(max_atoms, hi - lo + 1) + 1))
    values = np.sort(rng.choice(np.arange(lo, hi + 1), size=k, replace=False))
    w = rng.uniform(0.1, 1.0, size=k)
    return IntegerPMF(tuple(int(v) for v in values), tuple(w / w.sum()))


def random_model(rng: np.random.Generator, m: int | None = None, zero_drift: bool = False,
                 eta_reach: int = 4, max_atoms: int = 7, start: int = 0) -> WalkModel:
    """Random model passing the closed-class precondition."""
    while True:
        mm = int(rng.integers(0, 3)) if m is None else m
        xi = zero_mean_law(rng, 2 * mm + 1, max_atoms)
        laws = {}
        for j in range(-mm, mm + 1):
            if zero_drift:
                laws[j] = zero_mean_law(rng, eta_reach, max_atoms) if rng.random() < 0.8 else \
                    IntegerPMF.from_pairs([[-1, 0.5], [1, 0.5]])
            else:
                laws[j] = random_law(rng, -eta_reach, eta_reach, max_atoms)
        model = WalkModel(mm, xi, laws, start=start)
        if closed_class_check(model).ok:
            return model


# lines collected by the acceptance suite and echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
