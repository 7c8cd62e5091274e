"""Brute-force reference computations independent of the library solvers."""
from __future__ import annotations

import math
from functools import reduce

import numpy as np


def entrance_by_iteration(values, probs, m, top=None, tol=1e-13, max_squarings=80):
    """First-entrance laws into ``[-m, m]`` from ``m+1..top`` by powering the absorbing chain.

    Moves beyond ``top`` come back by whole multiples of the lattice step so
    the residue class of the walk is kept.  Returns an array indexed by
    ``y - m - 1`` with columns ``i + m``.
    """
    top = m + 500 if top is None else top
    g = reduce(math.gcd, (abs(int(v)) for v in values if v != 0))
    w = 2 * m + 1
    nt = top - m
    size = w + nt
    P = np.zeros((size, size))
    P[:w, :w] = np.eye(w)
    for r in range(nt):
        y = m + 1 + r
        for d, p in zip(values, probs):
            z = y + int(d)
            if z > top:
                z -= g * (-(-(z - top) // g))
            if z <= m:
                P[w + r, z + m] += p
            else:
                P[w + r, w + z - m - 1] += p
    prev = None
    for _ in range(max_squarings):
        P = P @ P
        cur = P[w:, :w]
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur.copy()
    return P[w:, :w]


def stationary_by_eig(P):
    """Left Perron vector of ``P`` normalized to a probability vector."""
    vals, vecs = np.linalg.eig(np.asarray(P).T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return v / v.sum()
