"""The locally perturbed walk: model data and irreducibility."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ModelError, ReducibleChain
from .integer_dist import IntegerPMF, StepLaw, validate_step_law


@dataclass(frozen=True)
class WalkModel:
    """Walk on the integers perturbed on the membrane ``A = center + [-m, m]``.

    Outside the membrane the walk adds i.i.d. copies of ``step_law``; from a
    membrane state ``j`` it adds a draw from ``membrane_laws[j]``.
    ``membrane_laws`` is keyed by absolute state.  ``center`` is zero unless
    the model was translated with :meth:`shifted`.
    """

    m: int
    step_law: IntegerPMF
    membrane_laws: Mapping[int, IntegerPMF]
    start: int = 0
    center: int = 0
    checked_step: StepLaw = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ModelError("m must be a nonnegative integer")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "start", int(self.start))
        object.__setattr__(self, "center", int(self.center))
        object.__setattr__(self, "checked_step", validate_step_law(self.step_law, self.m))
        laws = {int(k): v for k, v in dict(self.membrane_laws).items()}
        expected = set(range(self.center - self.m, self.center + self.m + 1))
        if set(laws) != expected:
            raise ModelError(
                f"membrane laws must be given exactly for states {sorted(expected)}"
            )
        for k, v in laws.items():
            if not isinstance(v, IntegerPMF):
                raise ModelError(f"membrane law at {k} is not an IntegerPMF")
        object.__setattr__(self, "membrane_laws", dict(sorted(laws.items())))

    @property
    def sigma2(self) -> float:
        return self.checked_step.sigma2

    @property
    def membrane(self) -> range:
        return range(self.center - self.m, self.center + self.m + 1)

    def eta(self, i: int) -> IntegerPMF:
        """Membrane law at relative position ``i`` in ``[-m, m]``."""
        return self.membrane_laws[self.center + i]

    @property
    def max_eta(self) -> int:
        return max(law.max_abs() for law in self.membrane_laws.values())

    def shifted(self, k: int) -> "WalkModel":
        """Translate membrane, laws and start by ``k``."""
        k = int(k)
        return WalkModel(
            self.m,
            self.step_law,
            {j + k: law for j, law in self.membrane_laws.items()},
            start=self.start + k,
            center=self.center + k,
        )

    def negated(self) -> "WalkModel":
        """Mirror image under ``x -> -x``."""
        return WalkModel(
            self.m,
            self.step_law.negated(),
            {-j: law.negated() for j, law in self.membrane_laws.items()},
            start=-self.start,
            center=-self.center,
        )

    def with_membrane_laws(self, laws: Mapping[int, IntegerPMF]) -> "WalkModel":
        return WalkModel(self.m, self.step_law, laws, start=self.start, center=self.center)

    def mean_drift(self, pi) -> float:
        """``sum_j pi_j E eta_j`` over the membrane, ``pi`` in membrane order."""
        return float(sum(p * self.membrane_laws[j].mean() for p, j in zip(pi, self.membrane)))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "start": self.start,
            "center": self.center,
            "xi": self.step_law.to_pairs(),
            "eta": {str(j): law.to_pairs() for j, law in self.membrane_laws.items()},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "WalkModel":
        return cls(
            int(doc["m"]),
            IntegerPMF.from_pairs(doc["xi"]),
            {int(k): IntegerPMF.from_pairs(v) for k, v in doc["eta"].items()},
            start=int(doc.get("start", 0)),
            center=int(doc.get("center", 0)),
        )


def relative_tables(model: WalkModel):
    """Alias tables for the compiled kernel, membrane laws in relative order.

    Returns ``(step_vals, step_cut, step_alias, eta_vals, eta_cut, eta_alias,
    eta_size)``; the membrane arrays have one padded row per relative state.
    """
    sv, sc, sa = model.step_law.alias_table
    rows = [model.eta(i).alias_table for i in range(-model.m, model.m + 1)]
    width = max(len(r[0]) for r in rows)
    n = len(rows)
    ev = np.zeros((n, width), dtype=np.int64)
    ec = np.ones((n, width))
    ea = np.zeros((n, width), dtype=np.int64)
    es = np.zeros(n, dtype=np.int64)
    for r, (v, c, a) in enumerate(rows):
        k = len(v)
        ev[r, :k] = v
        ec[r, :k] = c
        ea[r, :k] = a
        es[r] = k
    return sv, sc, sa, ev, ec, ea, es


@dataclass(frozen=True)
class Irreducibility:
    ok: bool
    witness: tuple[int, int] | None = None
    band: tuple[int, int] | None = None

    def __bool__(self):
        return self.ok


def irreducibility_band(model: WalkModel) -> int:
    """Relative half-width of the state band searched by :func:`is_irreducible`."""
    return model.m + model.max_eta + 2 * (2 * model.m + 1)


def is_irreducible(model: WalkModel) -> Irreducibility:
    """Decide whether the states reachable from the membrane form one class.

    The search runs over relative states ``[-B, B]`` with ``B`` from
    :func:`irreducibility_band`; moves leaving the band are dropped.  The
    chain passes when every membrane state reaches every other, every
    reachable state leads back, and at least one non-membrane state is
    reachable.  On failure ``witness = (a, b)`` gives absolute states with no
    path from ``a`` to ``b``.
    """
    m, c = model.m, model.center
    graph, band = _band_graph(model)
    root = band - m
    fwd = set(csgraph.breadth_first_order(graph, root, return_predecessors=False).tolist())
    bwd = set(csgraph.breadth_first_order(graph.T.tocsr(), root, return_predecessors=False).tolist())
    span = (c - band, c + band)
    for a in range(-m, m + 1):
        if a + band not in fwd:
            return Irreducibility(False, (c - m, c + a), span)
    if all(abs(x - band) <= m for x in fwd):
        return Irreducibility(False, (c - m, c + m + 1), span)
    for x in sorted(fwd, key=lambda v: abs(v - band)):
        if x not in bwd:
            return Irreducibility(False, (c + x - band, c - m), span)
    return Irreducibility(True, None, span)


def _band_graph(model: WalkModel):
    m = model.m
    band = irreducibility_band(model)
    rows, cols = [], []
    for x in range(-band, band + 1):
        support = model.step_law.values if abs(x) > m else model.eta(x).values
        for d in support:
            y = x + d
            if -band <= y <= band:
                rows.append(x + band)
                cols.append(y + band)
    size = 2 * band + 1
    graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    return graph, band


def closed_class_check(model: WalkModel) -> Irreducibility:
    """Weaker precondition used by simulation and analysis.

    Passes when exactly one closed communicating class is reachable from
    the membrane and that class contains a non-membrane state.  Membrane
    states outside the class are transient and get zero stationary weight.
    """
    m, c = model.m, model.center
    graph, band = _band_graph(model)
    _, label = csgraph.connected_components(graph, directed=True, connection="strong")
    reach = csgraph.breadth_first_order(graph, band - m, return_predecessors=False)
    seen = set(reach.tolist())
    for a in range(-m + 1, m + 1):
        seen.update(csgraph.breadth_first_order(graph, band + a, return_predecessors=False).tolist())
    closed = set()
    coo = graph.tocoo()
    leaks = set(label[coo.row[label[coo.row] != label[coo.col]]].tolist())
    for x in seen:
        if label[x] not in leaks:
            closed.add(label[x])
    span = (c - band, c + band)
    if len(closed) != 1:
        firsts = sorted(min(x for x in seen if label[x] == k) for k in closed)
        return Irreducibility(False, (firsts[0] - band + c, firsts[-1] - band + c), span)
    (k,) = closed
    members = [x - band for x in seen if label[x] == k]
    if all(abs(x) <= m for x in members):
        return Irreducibility(False, (members[0] + c, c + m + 1), span)
    return Irreducibility(True, None, span)


def require_irreducible(model: WalkModel, strict: bool = False) -> None:
    """Raise :class:`ReducibleChain` unless the model passes the chosen check."""
    res = is_irreducible(model) if strict else closed_class_check(model)
    if not res.ok:
        raise ReducibleChain(
            f"walk is not irreducible: no path from {res.witness[0]} to {res.witness[1]}",
            witness=res.witness,
        )
