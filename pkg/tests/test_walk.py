import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwl import IntegerPMF, WalkModel, scaled_path, simulate, simulate_batch
from mwl.errors import GridBeyondHorizon, ReducibleChain
from mwl.rng import make_rng
from mwl.walk import SNAP_FIELDS, WalkPath, merge_summaries, rho_partial_sums, write_path_csv

from builders import SIMPLE, c1, random_model


def reference_walk(model, n, seed, stream=0):
    """Step-by-step replay of the recursion on the same uniforms, absolute coordinates."""
    u = make_rng(seed, stream).random(n)
    lo, hi = model.center - model.m, model.center + model.m
    x = [model.start]
    for k in range(n):
        cur = x[-1]
        law = model.membrane_laws[cur] if lo <= cur <= hi else model.step_law
        x.append(cur + law.sample_from_uniform(u[k]))
    return np.array(x)


def reference_functionals(rel, m):
    """Path functionals computed directly from relative positions."""
    n = len(rel) - 1
    out = {}
    for side, s in (("plus", 1), ("minus", -1)):
        y = s * rel
        M = np.zeros(n + 1, dtype=np.int64)
        L = np.zeros(n + 1, dtype=np.int64)
        R = np.zeros(n + 1, dtype=np.int64)
        landing = 0
        outside = y[0] > m
        L[0] = y[0] if outside else 0
        for k in range(1, n + 1):
            M[k] = M[k - 1] + (y[k] - y[k - 1] if y[k - 1] > m else 0)
            L[k] = L[k - 1]
            if outside and y[k] <= m:
                outside = False
                landing = y[k]
            elif not outside and y[k] > m:
                outside = True
                L[k] += y[k] - landing
            R[k] = 0 if outside else -landing
        out[side] = (M, L, R)
    inside = np.abs(rel) <= m
    hits = np.flatnonzero(inside[1:]) + 1
    rho = []
    for a, b in zip(hits[:-1], hits[1:]):
        after = rel[a + 1]
        rp = rel[b] - rel[a] if after <= m else after - rel[a]
        rm = -(rel[b] - rel[a]) if -after <= m else -(after - rel[a])
        rho.append((rp, rm))
    pos = neg = 0
    k = 0
    while k <= n:
        if inside[k]:
            k += 1
            continue
        j = k
        while j <= n and not inside[j]:
            j += 1
        if j <= n and k > 0:
            if rel[k] > 0:
                pos += 1
            else:
                neg += 1
        k = j
    out["nu"] = np.cumsum(inside)
    out["hits"] = hits
    out["rho"] = np.array(rho, dtype=np.int64).reshape(-1, 2)
    out["excursions"] = (pos, neg)
    return out


def check_against_reference(model, n, seed, stream=0):
    path, ledger = simulate(model, n, seed=seed, stream=stream, record="full")
    ref = reference_walk(model, n, seed, stream)
    assert np.array_equal(path.positions, ref)
    rel = ref - model.center
    m = model.m
    f = reference_functionals(rel, m)
    for side, s in (("plus", 1), ("minus", -1)):
        M, L, R = f[side]
        assert np.array_equal(ledger.series[f"M_{side}"], M)
        assert np.array_equal(ledger.series[f"L_{side}"], L)
        assert np.array_equal(ledger.series[f"R_{side}"], R)
        lhs = np.where(s * rel > m, s * rel, 0)
        assert np.array_equal(lhs, M + L + R)
        assert np.all(np.diff(L) >= 0)
        assert np.all(np.abs(R) <= m)
    assert ledger.nu == f["nu"][-1]
    assert np.array_equal(path.hit_times, f["hits"])
    assert np.array_equal(ledger.rho, f["rho"])
    assert (ledger.excursions_pos, ledger.excursions_neg) == f["excursions"]
    assert ledger.cycles == max(len(f["hits"]) - 1, 0)
    return path, ledger


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), stream=st.integers(0, 2**20),
       n=st.integers(0, 400), start=st.integers(-8, 8), shift=st.integers(-5, 5))
def test_engine_matches_reference_interpreter(seed, stream, n, start, shift):
    model = random_model(np.random.default_rng(seed % 2**32), start=start).shifted(shift)
    check_against_reference(model, n, seed, stream)


def test_reference_across_chunk_boundary():
    model = random_model(np.random.default_rng(7), m=2)
    check_against_reference(model, 70_000, seed=3, stream=9)


def test_n_zero():
    for start, expect in ((0, 1), (1, 1), (2, 0), (-5, 0)):
        model = WalkModel(1, SIMPLE, {j: SIMPLE for j in (-1, 0, 1)}, start=start)
        path, ledger = simulate(model, 0, record="full")
        assert path.positions.tolist() == [start]
        assert ledger.nu == expect
        assert ledger.M_plus == ledger.M_minus == 0
        if abs(start) <= 1:
            assert ledger.L_plus == ledger.L_minus == 0


def test_unit_increments_when_all_laws_are_unit():
    model = WalkModel(1, SIMPLE, {j: SIMPLE for j in (-1, 0, 1)})
    path, _ = simulate(model, 5000, seed=2, record="full")
    assert np.all(np.abs(np.diff(path.positions)) == 1)


def test_push_right_cycles():
    model = WalkModel(0, SIMPLE, {0: IntegerPMF.point(2)})
    path, ledger = check_against_reference(model, 20_000, seed=17)
    x = path.positions
    visits = np.flatnonzero(x[:-1] == 0)
    assert np.all(x[visits + 1] == 2)
    assert np.all(ledger.rho[:, 0] == 2)
    assert np.all(ledger.rho[:, 1] == 0)
    plus, minus, cycles = rho_partial_sums(ledger)
    assert (plus, minus) == (2 * cycles, 0)
    flipped = WalkModel(0, SIMPLE, {0: IntegerPMF.point(-2)})
    _, fl = simulate(flipped, 20_000, seed=17, record="cycles")
    assert np.all(fl.rho[:, 0] == 0) and np.all(fl.rho[:, 1] == 2)


def test_rho_inside_only_cycles():
    # membrane jumps stay inside A: every rho+ is the embedded-chain increment
    stay = IntegerPMF.from_pairs([[-1, 0.5], [1, 0.5]])
    model = WalkModel(2, SIMPLE, {-2: IntegerPMF.point(1), -1: stay, 0: stay, 1: stay,
                                  2: IntegerPMF.from_pairs([[-1, 0.9], [1, 0.1]])})
    path, ledger = check_against_reference(model, 3000, seed=5)
    hits = path.membrane_hits
    assert hits[0] == (0, model.start)
    inside_cycles = [k for k in range(len(hits) - 2) if abs(path.positions[hits[k + 1][0] + 1]) <= 2]
    for k in inside_cycles:
        assert ledger.rho[k, 0] == hits[k + 2][1] - hits[k + 1][1]


def test_reproducible_and_stream_dependent():
    model = c1()
    a = simulate(model, 10_000, seed=1, stream=2)[1].summary()
    b = simulate(model, 10_000, seed=1, stream=2)[1].summary()
    c = simulate(model, 10_000, seed=1, stream=3)[1].summary()
    assert a == b and a != c


def test_checkpoints_match_full_series():
    model = random_model(np.random.default_rng(1), m=1, start=3)
    cps = [0, 1, 10, 999, 1000]
    path, ledger = simulate(model, 1000, seed=8, record="full", checkpoints=cps)
    snap = ledger.checkpoints
    for row, k in enumerate(cps):
        assert snap[row, SNAP_FIELDS.index("x")] == path.positions[k] - model.center
        assert snap[row, SNAP_FIELDS.index("M_plus")] == ledger.series["M_plus"][k]
        assert snap[row, SNAP_FIELDS.index("L_minus")] == ledger.series["L_minus"][k]
    batch = simulate_batch(model, 1000, 8, [0], checkpoints=cps)
    assert np.array_equal(batch.snapshots[0], snap)
    with pytest.raises(GridBeyondHorizon):
        simulate(model, 10, checkpoints=[11])


def test_reducible_model_refused():
    with pytest.raises(ReducibleChain):
        simulate(WalkModel(0, SIMPLE, {0: IntegerPMF.point(0)}), 10)


def test_scaled_path_index_arithmetic():
    path = WalkPath(n=4, start=0, final=0, positions=np.array([0, 1, 2, 1, 0]))
    assert scaled_path(path, 4, [0.5])[0] == 1.0
    assert scaled_path(path, 4, [0.0, 1.0]).tolist() == [0.0, 0.0]
    const = WalkPath(n=9, start=3, final=3, positions=np.full(10, 3))
    assert np.allclose(scaled_path(const, 9, [0, 0.3, 1.0]), 1.0)
    assert np.allclose(scaled_path(const, 9, [0.5], sigma=2.0), 0.5)
    with pytest.raises(GridBeyondHorizon):
        scaled_path(path, 4, [1.5])


def test_csv_dump_and_summary_merge():
    path, ledger = simulate(c1(), 5, seed=1, record="full")
    buf = io.StringIO()
    write_path_csv(path, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "step,position" and len(lines) == 7
    s = ledger.summary()
    assert set(s) == {"n", "M_plus", "M_minus", "L_plus", "L_minus", "nu", "rho_plus_sum",
                      "rho_minus_sum", "cycles", "excursions_pos", "excursions_neg"}
    ab = merge_summaries([s, s])
    assert ab["paths"] == 2 and ab["nu"] == 2 * s["nu"]
    assert merge_summaries([s, ab]) == merge_summaries([ab, s])


def test_martingale_nullity():
    batch = simulate_batch(c1(), 2000, 42, range(4000), checkpoints=[2000])
    m = batch.column("M_plus")[:, 0] - batch.column("M_minus")[:, 0]
    assert abs(m.mean()) <= 3 * m.std(ddof=1) / np.sqrt(m.size)
