"""Simulation of the perturbed walk and its path functionals.

The walk is simulated in coordinates relative to the membrane center.  One
uniform is consumed per step (a free step or a membrane jump, drawn through
an alias table), so the uniform stream of ``(seed, stream)`` indexes the
path step by step.

Alongside the positions the kernel keeps, streaming and in integer
arithmetic:

* ``M+/M-``: signed sums of free steps taken from ``+-X > m``;
* ``L+/L-``: the jumps ``+-(X(sigma) - X(tau))`` accrued each time the walk
  enters ``+-X > m`` from the gap;
* ``R+/R-``: the residual ``-+X(tau)`` while the walk sits in the gap.

With these, ``+-X(n) 1{+-X(n) > m} = M+-(n) + L+-(n) + R+-(n)`` holds
exactly.  The value before the first gap is taken as 0 (the membrane
center), so the identity holds for any start; for a start at the center
this is the usual decomposition.

Membrane visit cycles (``alpha_k``, ``k >= 1``) give the increments
``rho+-_k``; a cycle counts once the next visit has happened.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import GridBeyondHorizon
from .model import WalkModel, relative_tables, require_irreducible
from .rng import CHUNK, make_rng

# kernel state slots
X, STEP, MP, MM, LP, LM, TAUP, TAUM, INP, INM, NU, OCCP, OCCM = range(13)
HAVE_CYCLE, LAST_Y, PENDING, XAFTER, RHOP, RHOM, CYCLES = range(13, 20)
EXC_SIGN, EXC_START, EXC_HEIGHT, EXC_INITIAL, EXC_POS, EXC_NEG = range(20, 26)
LP_INC, LM_INC, LP_BAD, LM_BAD = range(26, 30)
CP_PTR, NHITS, NCYC_REC, NEXC_REC, EXC_POS_HIGH, EXC_NEG_HIGH = range(30, 36)
NSTATE = 36

# checkpoint snapshot columns
SNAP_FIELDS = ("x", "M_plus", "M_minus", "L_plus", "L_minus", "nu", "occ_plus", "occ_minus")
NSNAP = len(SNAP_FIELDS)

LEVELS = {"summary": 0, "cycles": 1, "full": 2}


@numba.njit(cache=True)
def _draw(u, vals, cut, alias, k):
    s = u * k
    idx = int(s)
    if idx >= k:
        idx = k - 1
    if s - idx < cut[idx]:
        return vals[idx]
    return vals[alias[idx]]


@numba.njit(cache=True)
def _snapshot(st, snap, row):
    snap[row, 0] = st[X]
    snap[row, 1] = st[MP]
    snap[row, 2] = st[MM]
    snap[row, 3] = st[LP]
    snap[row, 4] = st[LM]
    snap[row, 5] = st[NU]
    snap[row, 6] = st[OCCP]
    snap[row, 7] = st[OCCM]


@numba.njit(cache=True)
def _advance(u, st, m, hthr, sv, sc, sa, ev, ec, ea, es, cps, snap, level,
             pos, ser, hit_t, hit_v, rho_seq, exc_rec):
    ks = sv.size
    ncp = cps.size
    for i in range(u.size):
        xprev = st[X]
        if xprev > m:
            d = _draw(u[i], sv, sc, sa, ks)
            st[MP] += d
            st[OCCP] += 1
        elif xprev < -m:
            d = _draw(u[i], sv, sc, sa, ks)
            st[MM] -= d
            st[OCCM] += 1
        else:
            r = xprev + m
            d = _draw(u[i], ev[r], ec[r], ea[r], es[r])
        x = xprev + d
        st[X] = x
        st[STEP] += 1
        step = st[STEP]
        inside = -m <= x <= m

        # plus side gap / excursion
        if st[INP] == 1:
            if x <= m:
                st[INP] = 0
                st[TAUP] = x
        elif x > m:
            st[INP] = 1
            st[LP] += x - st[TAUP]
            st[LP_INC] += 1
            if xprev > m or xprev < -m:
                st[LP_BAD] += 1
        # minus side
        if st[INM] == 1:
            if x >= -m:
                st[INM] = 0
                st[TAUM] = x
        elif x < -m:
            st[INM] = 1
            st[LM] -= x - st[TAUM]
            st[LM_INC] += 1
            if xprev > m or xprev < -m:
                st[LM_BAD] += 1

        # excursion records
        if st[EXC_SIGN] != 0:
            if inside:
                if st[EXC_INITIAL] == 0:
                    high = st[EXC_HEIGHT] >= hthr
                    if st[EXC_SIGN] > 0:
                        st[EXC_POS] += 1
                        if high:
                            st[EXC_POS_HIGH] += 1
                    else:
                        st[EXC_NEG] += 1
                        if high:
                            st[EXC_NEG_HIGH] += 1
                if level >= 1:
                    j = st[NEXC_REC]
                    exc_rec[j, 0] = st[EXC_START]
                    exc_rec[j, 1] = step
                    exc_rec[j, 2] = st[EXC_SIGN]
                    exc_rec[j, 3] = st[EXC_HEIGHT]
                    exc_rec[j, 4] = st[EXC_INITIAL]
                    st[NEXC_REC] = j + 1
                st[EXC_SIGN] = 0
                st[EXC_INITIAL] = 0
            else:
                ax = x if x > 0 else -x
                if ax > st[EXC_HEIGHT]:
                    st[EXC_HEIGHT] = ax
        elif not inside:
            st[EXC_SIGN] = 1 if x > 0 else -1
            st[EXC_START] = step
            st[EXC_HEIGHT] = x if x > 0 else -x

        # membrane visit cycles
        if st[PENDING] == 1:
            st[XAFTER] = x
            st[PENDING] = 0
        if inside:
            st[NU] += 1
            if st[HAVE_CYCLE] == 1:
                y0 = st[LAST_Y]
                xa = st[XAFTER]
                if xa <= m:
                    rp = x - y0
                else:
                    rp = xa - y0
                if -xa <= m:
                    rm = -(x - y0)
                else:
                    rm = -(xa - y0)
                st[RHOP] += rp
                st[RHOM] += rm
                if level >= 1:
                    j = st[CYCLES]
                    rho_seq[j, 0] = rp
                    rho_seq[j, 1] = rm
                st[CYCLES] += 1
            st[HAVE_CYCLE] = 1
            st[LAST_Y] = x
            st[PENDING] = 1
            if level >= 1:
                j = st[NHITS]
                hit_t[j] = step
                hit_v[j] = x
                st[NHITS] = j + 1

        if level >= 2:
            pos[step] = x
            ser[step, 0] = st[MP]
            ser[step, 1] = st[MM]
            ser[step, 2] = st[LP]
            ser[step, 3] = st[LM]
            ser[step, 4] = 0 if st[INP] == 1 else -st[TAUP]
            ser[step, 5] = 0 if st[INM] == 1 else st[TAUM]

        while st[CP_PTR] < ncp and cps[st[CP_PTR]] == step:
            _snapshot(st, snap, st[CP_PTR])
            st[CP_PTR] += 1


def _initial_state(x0: int, m: int) -> np.ndarray:
    st = np.zeros(NSTATE, dtype=np.int64)
    st[X] = x0
    if x0 > m:
        st[INP] = 1
        st[LP] = x0
    if x0 < -m:
        st[INM] = 1
        st[LM] = -x0
    if abs(x0) <= m:
        st[NU] = 1
    else:
        st[EXC_SIGN] = 1 if x0 > 0 else -1
        st[EXC_HEIGHT] = abs(x0)
        st[EXC_INITIAL] = 1
    return st


@dataclass
class WalkPath:
    """A simulated trajectory.

    ``positions`` is kept only for ``record="full"``; membrane visit times
    ``alpha_k`` (``k >= 1``) and values ``Y(k)`` only for ``"cycles"`` or
    ``"full"``.
    """

    n: int
    start: int
    final: int
    center: int = 0
    positions: np.ndarray | None = None
    hit_times: np.ndarray | None = None
    hit_values: np.ndarray | None = None

    @property
    def membrane_hits(self) -> list[tuple[int, int]]:
        """``[(alpha_0, Y(0)), (alpha_1, Y(1)), ...]`` with ``alpha_0 = 0``."""
        if self.hit_times is None:
            raise ValueError("membrane hits were not recorded")
        out = [(0, self.start)]
        out.extend(zip(self.hit_times.tolist(), self.hit_values.tolist()))
        return out


@dataclass
class ExcursionLedger:
    """Path functionals of one simulated walk, values at the horizon ``n``.

    Positions inside the ledger (``series["R_plus"]``, excursion heights,
    rho values) are relative to the membrane center.
    """

    n: int
    M_plus: int
    M_minus: int
    L_plus: int
    L_minus: int
    nu: int
    occ_plus: int
    occ_minus: int
    rho_plus_sum: int
    rho_minus_sum: int
    cycles: int
    excursions_pos: int
    excursions_neg: int
    excursions_pos_high: int = 0
    excursions_neg_high: int = 0
    L_plus_increments: int = 0
    L_minus_increments: int = 0
    L_plus_unlocalized: int = 0
    L_minus_unlocalized: int = 0
    series: dict | None = None
    rho: np.ndarray | None = None
    excursions: np.ndarray | None = None
    checkpoints: np.ndarray | None = None
    checkpoint_steps: np.ndarray | None = None

    SUMMARY_FIELDS = (
        "n", "M_plus", "M_minus", "L_plus", "L_minus", "nu",
        "rho_plus_sum", "rho_minus_sum", "cycles", "excursions_pos", "excursions_neg",
    )

    def summary(self) -> dict:
        return {k: int(getattr(self, k)) for k in self.SUMMARY_FIELDS}

    @property
    def localization_fraction(self) -> float:
        """Share of L increments launched from outside the membrane (always 0)."""
        total = self.L_plus_increments + self.L_minus_increments
        if total == 0:
            return 0.0
        return (self.L_plus_unlocalized + self.L_minus_unlocalized) / total


def merge_summaries(summaries) -> dict:
    """Sum ledger summaries field by field; associative and order free."""
    out: dict = {}
    for s in summaries:
        s = dict(s)
        s.setdefault("paths", 1)
        for k, v in s.items():
            out[k] = out.get(k, 0) + v
    return out


class _Compiled:
    """Per-model kernel inputs, built once and reused across paths."""

    def __init__(self, model: WalkModel):
        self.model = model
        self.m = model.m
        self.tables = relative_tables(model)
        self.x0 = model.start - model.center


def _run(comp: _Compiled, n: int, seed: int, stream: int, level: int,
         cps: np.ndarray, hthr: int):
    m = comp.m
    st = _initial_state(comp.x0, m)
    snap = np.zeros((cps.size, NSNAP), dtype=np.int64)
    while st[CP_PTR] < cps.size and cps[st[CP_PTR]] == 0:
        _snapshot(st, snap, st[CP_PTR])
        st[CP_PTR] += 1
    cap = n + 1 if level >= 1 else 0
    full = n + 1 if level >= 2 else 0
    pos = np.zeros(full, dtype=np.int64)
    ser = np.zeros((full, 6), dtype=np.int64)
    hit_t = np.zeros(cap, dtype=np.int64)
    hit_v = np.zeros(cap, dtype=np.int64)
    rho = np.zeros((cap, 2), dtype=np.int64)
    exc = np.zeros((cap, 5), dtype=np.int64)
    if level >= 2:
        pos[0] = comp.x0
        ser[0] = (st[MP], st[MM], st[LP], st[LM],
                  0 if st[INP] else -st[TAUP], 0 if st[INM] else st[TAUM])
    rng = make_rng(seed, stream)
    left = n
    while left > 0:
        k = min(CHUNK, left)
        _advance(rng.random(k), st, m, hthr, *comp.tables, cps, snap, level,
                 pos, ser, hit_t, hit_v, rho, exc)
        left -= k
    return st, snap, pos, ser, hit_t, hit_v, rho, exc


def simulate(model: WalkModel, n: int, seed: int = 0, stream: int = 0,
             record: str = "summary", checkpoints=None, height_threshold: int = 0,
             check: bool = True):
    """Run ``n`` steps of the walk and return ``(WalkPath, ExcursionLedger)``.

    Parameters
    ----------
    record : {"summary", "cycles", "full"}
        ``"summary"`` keeps O(1) state; ``"cycles"`` adds membrane hits, the
        per-cycle ``rho`` pairs and excursion records; ``"full"`` also keeps
        positions and the per-step decomposition series.
    checkpoints : sequence of int, optional
        Steps at which to snapshot ``SNAP_FIELDS``.
    height_threshold : int
        Excursions reaching at least this relative height are also counted
        in ``excursions_pos_high`` / ``excursions_neg_high``.
    """
    if check:
        require_irreducible(model)
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    level = LEVELS[record]
    cps = _checkpoint_array(checkpoints, n)
    comp = _Compiled(model)
    return _package(comp, n, level, cps, *_run(comp, n, seed, stream, level, cps, height_threshold))


def _checkpoint_array(checkpoints, n):
    if checkpoints is None:
        return np.zeros(0, dtype=np.int64)
    cps = np.unique(np.asarray(checkpoints, dtype=np.int64))
    if cps.size and (cps[0] < 0 or cps[-1] > n):
        raise GridBeyondHorizon(f"checkpoints must lie in [0, {n}]")
    return cps


def _package(comp, n, level, cps, st, snap, pos, ser, hit_t, hit_v, rho, exc):
    c = comp.model.center
    path = WalkPath(n=n, start=comp.model.start, final=int(st[X]) + c, center=c)
    ledger = ExcursionLedger(
        n=n,
        M_plus=int(st[MP]), M_minus=int(st[MM]),
        L_plus=int(st[LP]), L_minus=int(st[LM]),
        nu=int(st[NU]), occ_plus=int(st[OCCP]), occ_minus=int(st[OCCM]),
        rho_plus_sum=int(st[RHOP]), rho_minus_sum=int(st[RHOM]),
        cycles=int(st[CYCLES]),
        excursions_pos=int(st[EXC_POS]), excursions_neg=int(st[EXC_NEG]),
        excursions_pos_high=int(st[EXC_POS_HIGH]), excursions_neg_high=int(st[EXC_NEG_HIGH]),
        L_plus_increments=int(st[LP_INC]), L_minus_increments=int(st[LM_INC]),
        L_plus_unlocalized=int(st[LP_BAD]), L_minus_unlocalized=int(st[LM_BAD]),
    )
    if cps.size:
        ledger.checkpoints = snap
        ledger.checkpoint_steps = cps
    if level >= 1:
        path.hit_times = hit_t[: st[NHITS]].copy()
        path.hit_values = hit_v[: st[NHITS]] + c
        ledger.rho = rho[: st[CYCLES]].copy()
        ledger.excursions = exc[: st[NEXC_REC]].copy()
    if level >= 2:
        path.positions = pos + c
        ledger.series = {
            "M_plus": ser[:, 0].copy(), "M_minus": ser[:, 1].copy(),
            "L_plus": ser[:, 2].copy(), "L_minus": ser[:, 3].copy(),
            "R_plus": ser[:, 4].copy(), "R_minus": ser[:, 5].copy(),
        }
    return path, ledger


@dataclass
class BatchResult:
    """Checkpoint snapshots and final ledgers of many independent paths.

    Snapshot columns follow ``SNAP_FIELDS``; ``x`` is measured from the
    membrane center.
    """

    steps: np.ndarray
    snapshots: np.ndarray            # (paths, checkpoints, NSNAP)
    ledgers: list = field(default_factory=list)
    seed: int = 0
    streams: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.snapshots[:, :, SNAP_FIELDS.index(name)]


def simulate_batch(model: WalkModel, n: int, seed: int, streams, checkpoints=None,
                   record: str = "summary", height_threshold: int = 0) -> BatchResult:
    """Simulate one path per stream index under a common ``seed``."""
    require_irreducible(model)
    n = int(n)
    level = LEVELS[record]
    cps = _checkpoint_array(checkpoints if checkpoints is not None else [n], n)
    comp = _Compiled(model)
    streams = list(streams)
    snaps = np.zeros((len(streams), cps.size, NSNAP), dtype=np.int64)
    ledgers = []
    for i, s in enumerate(streams):
        out = _run(comp, n, seed, s, level, cps, height_threshold)
        _, ledger = _package(comp, n, level, cps, *out)
        snaps[i] = out[1]
        ledger.checkpoints = None
        ledgers.append(ledger)
    return BatchResult(cps, snaps, ledgers, seed, streams)


def rho_partial_sums(ledger: ExcursionLedger) -> tuple[int, int, int]:
    """``(sum rho+_k, sum rho-_k, completed cycles)`` over finished cycles."""
    return ledger.rho_plus_sum, ledger.rho_minus_sum, ledger.cycles


def scaled_path(path: WalkPath, n: int, grid, sigma: float | None = None) -> np.ndarray:
    """Evaluate ``X([n t]) / sqrt(n)`` on ``grid`` (divided by ``sigma`` if given)."""
    if path.positions is None:
        raise ValueError("scaled_path needs a path recorded with record='full'")
    t = np.atleast_1d(np.asarray(grid, dtype=float))
    idx = np.floor(n * t + 1e-9).astype(np.int64)
    if np.any(t < 0) or np.any(idx > path.n):
        raise GridBeyondHorizon(f"grid reaches beyond t = {path.n / n}")
    vals = path.positions[idx] / math.sqrt(n)
    if sigma is not None:
        vals = vals / sigma
    return vals


def write_path_csv(path: WalkPath, fh) -> None:
    if path.positions is None:
        raise ValueError("path positions were not recorded")
    fh.write("step,position\n")
    for k, x in enumerate(path.positions.tolist()):
        fh.write(f"{k},{x}\n")
