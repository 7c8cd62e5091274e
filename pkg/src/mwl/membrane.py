"""Exact analysis of the membrane: re-entry laws, embedded chain, gamma.

Everything here is deterministic linear algebra on the model data; nothing
is sampled.  Positions are relative to the membrane center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import linalg

from .errors import BandTooSmall, DegenerateDenominator, NoConvergence, SingularSystem
from .integer_dist import truncate_tail
from .model import WalkModel, require_irreducible

MAX_STATES = 1 << 20


@dataclass
class ReentryKernel:
    """First-entrance laws of the free walk into the membrane.

    ``plus[r]`` is the law over ``A = [-m, m]`` (column ``i + m``) of the
    entrance point for a free walk launched at ``y = m + 1 + r``;
    ``minus[r]`` the same for ``y = -(m + 1 + r)``.
    """

    m: int
    plus: np.ndarray
    minus: np.ndarray
    band_plus: int
    band_minus: int
    tol: float
    changes: dict = field(default_factory=dict)

    def row(self, y: int) -> np.ndarray:
        m = self.m
        if y > m:
            r, side = y - m - 1, self.plus
        elif y < -m:
            r, side = -y - m - 1, self.minus
        else:
            raise ValueError(f"{y} lies in the membrane")
        if r >= side.shape[0]:
            raise BandTooSmall(f"launch point {y} lies beyond the kernel rows")
        return side[r]

    def reach(self, sign: int) -> int:
        """Largest ``|y|`` with a stored row on the given side."""
        side = self.plus if sign > 0 else self.minus
        return self.m + side.shape[0]


def _lattice_step(values) -> int:
    return reduce(math.gcd, (abs(v) for v in values if v != 0))


def one_sided_entrance(values, probs, m: int, top: int, rows: int) -> np.ndarray:
    """Entrance laws into ``[-m, m]`` from ``y = m+1 .. m+rows``, walk kept above ``m``.

    Solves ``h(y, .) = sum_d p_d [1{y+d in A} e_{y+d} + 1{y+d > m} h(y+d, .)]``
    on ``y in (m, top]``.  Moves past ``top`` are folded back into the top
    ``g`` states, ``g`` the lattice step of the jump law, so residues mod
    ``g`` are preserved.
    """
    g = _lattice_step(values)
    size = top - m
    w = 2 * m + 1
    bw = max(abs(v) for v in values)
    ab = np.zeros((2 * bw + 1, size))
    ab[bw, :] = 1.0
    rhs = np.zeros((size, w))
    for d, p in zip(values, probs):
        r = np.arange(size)
        y = m + 1 + r
        z = y + d
        hit = z <= m
        if hit.any():
            rhs[r[hit], z[hit] + m] += p
        stay = ~hit
        z = z.copy()
        over = stay & (z > top)
        z[over] = z[over] - g * ((z[over] - top + g - 1) // g)
        col = z[stay] - m - 1
        row = r[stay]
        # banded storage: ab[bw + row - col, col] = A[row, col]
        np.add.at(ab, (bw + row - col, col), -p)
    sol = linalg.solve_banded((bw, bw), ab, rhs, check_finite=False)
    return np.clip(sol[:rows], 0.0, None)


def reentry_kernel(model: WalkModel, reach_plus: int | None = None,
                   reach_minus: int | None = None, tol: float = 1e-12,
                   max_states: int = MAX_STATES) -> ReentryKernel:
    """Re-entry laws ``h(y, .)`` for launch points up to the given reach.

    The truncation level starts at ``16 (2m+1) + max|eta|`` states and
    doubles until the rows change by less than ``tol`` (sup norm).
    ``reach_plus`` / ``reach_minus`` are the largest ``|y|`` needed and
    default to the farthest point a membrane jump can land.
    """
    m = model.m
    if reach_plus is None or reach_minus is None:
        hi, lo = _exit_reach(model)
        reach_plus = hi if reach_plus is None else reach_plus
        reach_minus = lo if reach_minus is None else reach_minus
    vals = np.asarray(model.step_law.values, dtype=np.int64)
    probs = np.asarray(model.step_law.probs)
    sides = {}
    changes = {}
    for sign, reach, v in ((1, reach_plus, vals), (-1, reach_minus, -vals)):
        rows = max(int(reach) - m, 1)
        states = 16 * (2 * m + 1) + max(model.max_eta, rows)
        prev = one_sided_entrance(v, probs, m, m + states, rows)
        while True:
            states *= 2
            if states > max_states:
                raise NoConvergence(
                    f"re-entry kernel did not settle to {tol} within {max_states} states"
                )
            cur = one_sided_entrance(v, probs, m, m + states, rows)
            delta = float(np.max(np.abs(cur - prev)))
            prev = cur
            if delta < tol:
                break
        if sign < 0:
            cur = cur[:, ::-1]
        sides[sign] = (cur, m + states)
        changes[sign] = delta
    return ReentryKernel(m, sides[1][0], sides[-1][0], sides[1][1], sides[-1][1], tol, changes)


def _exit_reach(model: WalkModel) -> tuple[int, int]:
    m = model.m
    hi = lo = m + 1
    for i in range(-m, m + 1):
        law = model.eta(i)
        hi = max(hi, i + law.values[-1])
        lo = max(lo, -(i + law.values[0]))
    return hi, lo


def embedded_matrix(model: WalkModel, kernel: ReentryKernel) -> np.ndarray:
    """Transition matrix of the walk watched on the membrane, rows/cols ``-m..m``."""
    m = model.m
    w = 2 * m + 1
    P = np.zeros((w, w))
    for j in range(-m, m + 1):
        law = model.eta(j)
        for e, p in zip(law.values, law.probs):
            y = j + e
            if -m <= y <= m:
                P[j + m, y + m] += p
            else:
                if abs(y) > kernel.reach(1 if y > 0 else -1):
                    raise BandTooSmall(f"membrane jump to {y} escapes the kernel band")
                P[j + m] += p * kernel.row(y)
    return P


def stationary(P: np.ndarray, residual_tol: float = 1e-10) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix by a direct solve."""
    P = np.asarray(P, dtype=float)
    w = P.shape[0]
    a = P.T - np.eye(w)
    a[-1, :] = 1.0
    b = np.zeros(w)
    b[-1] = 1.0
    try:
        pi = linalg.solve(a, b)
    except linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if np.all(np.isfinite(pi)) and pi.min() > -residual_tol:
        # transient states come out as +-1e-15 rather than exact zeros
        pi = np.where(pi < residual_tol * 1e-2, 0.0, pi)
        pi /= pi.sum()
    resid = float(np.max(np.abs(pi @ P - pi)))
    if not np.all(np.isfinite(pi)) or resid > residual_tol or pi.min() < 0.0:
        raise SingularSystem(f"stationary residual {resid:.3g}")
    return pi


@dataclass
class EmbeddedChain:
    """Embedded chain on the membrane and the limit skewness ``gamma``."""

    P: np.ndarray
    pi: np.ndarray
    e_plus: float
    e_minus: float
    gamma: float
    sigma2: float
    drift: float
    kernel: ReentryKernel | None = None
    truncation: dict = field(default_factory=dict)

    @property
    def cross_check_gap(self) -> float:
        """``|(e+ - e-) - sum_j pi_j E eta_j|``; zero up to rounding."""
        return abs((self.e_plus - self.e_minus) - self.drift)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "e_plus": self.e_plus,
            "e_minus": self.e_minus,
            "pi": self.pi.tolist(),
            "sigma2": self.sigma2,
            "drift": self.drift,
            "cross_check_gap": self.cross_check_gap,
            "truncation_report": self.truncation,
        }


def exit_overshoots(model: WalkModel, kernel: ReentryKernel, pi: np.ndarray) -> tuple[float, float]:
    """``E_pi (X(1) - X(alpha_1))^+`` and ``^-`` from the kernel."""
    m = model.m
    a = np.arange(-m, m + 1)
    plus_terms = []
    minus_terms = []
    for j in range(-m, m + 1):
        law = model.eta(j)
        for e, p in zip(law.values, law.probs):
            y = j + e
            if y > m:
                plus_terms.append(pi[j + m] * p * float(kernel.row(y) @ (y - a)))
            elif y < -m:
                minus_terms.append(pi[j + m] * p * float(kernel.row(y) @ (a - y)))
    return math.fsum(plus_terms), math.fsum(minus_terms)


def gamma_exact(model: WalkModel, eta_eps: float = 1e-8, tol: float = 1e-12) -> EmbeddedChain:
    """Compute ``gamma = E_pi (X(1) - X(alpha_1)) / E_pi |X(1) - X(alpha_1)|``.

    Membrane laws are first cut with :func:`truncate_tail` at ``eta_eps``;
    the removed mass and a first-order bound on the resulting error in
    gamma are reported in ``truncation``.
    """
    require_irreducible(model)
    cut = {}
    lost = {}
    for j, law in model.membrane_laws.items():
        cut[j], lost[j] = truncate_tail(law, eta_eps)
    work = model.with_membrane_laws(cut)
    kernel = reentry_kernel(work, tol=tol)
    P = embedded_matrix(work, kernel)
    pi = stationary(P)
    e_plus, e_minus = exit_overshoots(work, kernel, pi)
    denom = e_plus + e_minus
    if not denom > 0.0:
        raise DegenerateDenominator("the walk never leaves the membrane by a jump")
    gamma = (e_plus - e_minus) / denom
    drift = work.mean_drift(pi)
    max_lost = max(lost.values())
    overshoot = max(
        (abs(j - model.center + e) + model.m for j, law in cut.items() for e in law.values),
        default=0,
    )
    truncation = {
        "eta_eps": eta_eps,
        "lost_mass": {str(j): v for j, v in lost.items()},
        "max_lost_mass": max_lost,
        "gamma_error_bound": max_lost * overshoot / denom,
        "kernel_band": [kernel.band_minus, kernel.band_plus],
        "kernel_tol": tol,
    }
    return EmbeddedChain(P, pi, e_plus, e_minus, gamma, model.sigma2, drift, kernel, truncation)
