"""Acceptance criteria. Each test prints one PASS/FAIL line and asserts the same condition.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also echoed in the terminal summary.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

import conftest
from conftest import EQ3, EQ4, FIG4, split_hpda
from hpda_lab.analysis import (
    SWEEP_TARGETS,
    SystemParams,
    lower_bound_r1,
    optimize_baseline,
    rc,
    sweep_compare,
    hpda_perf,
    thm2_perf,
    thm3_perf,
)
from hpda_lab.hpda import grouping_hpda, hybrid_hpda, verify_hpda
from hpda_lab.pda import STAR, Pda, format_grid, mn_pda, partition_pda
from hpda_lab.scheme import Delivery, DemandMatrix, Library, Mode, Randomness, SchemeInstance
from hpda_lab.sim import AuditSpec, formula_vs_sim, measure_loads, mi_audit, random_full_rank_demand, run_session


def report(n, ok, detail, elapsed):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{elapsed * 1000:.1f} ms]"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    return ok


def best_of(fn, repeat=20):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def same_hpda(h, text):
    a0, subs = split_hpda(text)
    return np.array_equal(h.a0, a0) and all(np.array_equal(x, y) for x, y in zip(h.sub, subs)) and len(h.sub) == len(subs)


def test_c1_mn_pda_grid():
    p, dt = best_of(lambda: mn_pda(4, 2))
    text = "\n".join(format_grid(p.cells))
    ok = text.encode() == EQ3.encode() and dt < 1e-3
    assert report(1, ok, f"mn_pda(4,2) byte-identical={text == EQ3}", dt)


def test_c2_grouping_example():
    h, dt = best_of(lambda: grouping_hpda(2, 2, 2))
    sets_ok = h.s_m == set(range(5, 9)) and h.s_k == (frozenset(range(1, 7)), frozenset([1, 2, 3, 4, 7, 8]))
    verify_hpda(h)
    ok = same_hpda(h, EQ4) and sets_ok and dt < 10e-3
    assert report(2, ok, f"grouping_hpda(2,2,2) arrays={same_hpda(h, EQ4)} sets={sets_ok}", dt)


def test_c3_hybrid_example():
    t0 = time.perf_counter()
    h = hybrid_hpda(mn_pda(2, 1), mn_pda(3, 1))
    verify_hpda(h)
    dt = time.perf_counter() - t0
    C = mn_pda(3, 1).cells
    shifted = lambda s: np.where(C == STAR, STAR, C + s)
    layout = (np.array_equal(h.sub[0][:3], shifted(3)) and np.array_equal(h.sub[0][3:], C)
              and np.array_equal(h.sub[1][:3], C) and np.array_equal(h.sub[1][3:], shifted(6)))
    ok = same_hpda(h, FIG4) and layout and h.s_m == set(range(4, 10))
    assert report(3, ok, f"hybrid layout={layout} S_M={sorted(h.s_m)}", dt)


def _example_demand(N=24):
    D = np.zeros((4, N), dtype=np.int64)
    for u in range(4):
        D[u, 2 * u] = D[u, 2 * u + 1] = 1
    return DemandMatrix(D, 2)


def test_c4_worked_examples():
    want = {"plain": (Fraction(1, 6), Fraction(1, 3)), "sp": (Fraction(13, 72), Fraction(26, 72))}
    t0 = time.perf_counter()
    results = []
    h = grouping_hpda(2, 2, 2)
    for q in (2, 3):
        for mode in ("plain", "sp"):
            inst = SchemeInstance(h, 24, q, 6, Mode(mode), Delivery.MIRROR_ASSISTED)
            rng = np.random.default_rng(q)
            lib = Library.random(inst, rng)
            rand = Randomness.sample(inst, rng) if inst.secure else None
            t = run_session(inst, lib, rand, _example_demand())
            results.append(measure_loads(t, 6) == (Fraction(2, 3), 1) and t.memory == want[mode]
                           and len(t.decoded) == 4 and t.all_decoded)
    dt = time.perf_counter() - t0
    ok = all(results) and dt < 1
    assert report(4, ok, f"{sum(results)}/4 runs give R1=2/3 R2=1, memory and decode exact", dt)


def _random_case(rng):
    while True:
        K1, K2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        if K1 * K2 <= 9 and K1 * K2 >= 2:
            break
    if rng.random() < 0.5:
        t = int(rng.integers(K2, K1 * K2 + 1))
        h = grouping_hpda(K1, K2, t)
        return h, lambda N, mode: thm2_perf(K1, K2, t, N, mode)
    K1, K2 = max(K1, 2), max(K2, 2)
    if K1 * K2 > 9:
        K2 = 2 if K1 <= 4 else 1
        K1 = min(K1, 4)
    B, C = mn_pda(K1, int(rng.integers(1, K1))), mn_pda(K2, int(rng.integers(1, K2)))
    b, c = (B.K, B.F, B.Z, B.S), (C.K, C.F, C.Z, C.S)
    return hybrid_hpda(B, C), lambda N, mode: thm3_perf(b, c, N, mode)


def test_c5_property_suite():
    t0 = time.perf_counter()
    n, good = 0, 0
    combos = list(itertools.product((2, 3, 5), ("plain", "sp"), ("assisted", "blind")))
    for seed in range(120):
        q, mode, delivery = combos[seed % len(combos)]
        rng = np.random.default_rng(1000 + seed)
        h, closed = _random_case(rng)
        N = h.K1 * h.K2 + int(rng.integers(0, 4))
        D = random_full_rank_demand(h.K1, h.K2, N, q, rng)
        if delivery == "assisted":
            predicted = closed(N, mode)
        else:
            predicted = hpda_perf(h, N, mode, blind=True)
        chk = formula_vs_sim(h, N, q, mode, delivery, seed=seed, predicted=predicted, demand=D)
        n += 1
        good += chk.ok
    dt = time.perf_counter() - t0
    ok = n >= 100 and good == n and dt < 60
    assert report(5, ok, f"{good}/{n} randomized sessions decode and match closed forms", dt)


TINY = hybrid_hpda(mn_pda(2, 1), mn_pda(2, 1))


def test_c6_exact_audits():
    t0 = time.perf_counter()
    runs = {
        "security1": mi_audit(AuditSpec(TINY, 2, 2, "security1", budget=2**26)),
        "security2": mi_audit(AuditSpec(TINY, 2, 2, "security2", budget=2**26)),
        "privacy1": mi_audit(AuditSpec(TINY, 2, 2, "privacy1", t1={0}, budget=2**26)),
        "privacy2": mi_audit(AuditSpec(TINY, 2, 2, "privacy2", t1={0}, t2={0}, budget=2**26)),
    }
    plain = mi_audit(AuditSpec(TINY, 2, 2, "security1", mode="plain", budget=2**26))
    dt = time.perf_counter() - t0
    zero = {k: r.is_zero for k, r in runs.items()}
    ok = all(zero.values()) and plain.mi > 0 and dt < 300
    detail = " ".join(f"{k}={r.mi_text()}" for k, r in runs.items()) + f" plain_security1={plain.mi_text()}"
    assert report(6, ok, detail, dt)


def test_c7_r1_optimality():
    t0 = time.perf_counter()
    bad = []
    for K1, K2 in [(2, 2), (4, 3), (40, 20)]:
        for t in range(K2, K1 * K2 + 1):
            if thm2_perf(K1, K2, t, 10**4).R1 != lower_bound_r1(K1, K2, t) or lower_bound_r1(K1, K2, t) != Fraction(K1 * K2 - t, t + 1):
                bad.append((K1, K2, t))
    dt = time.perf_counter() - t0
    assert report(7, not bad, f"R1 equals (K-t)/(t+1) everywhere, mismatches={bad[:3]}", dt)


def test_c8_baselines():
    p = SystemParams(2, 2, 24, 4, 8)
    t0 = time.perf_counter()
    knmd = optimize_baseline(p, "knmd", grid=201)
    wwcy = optimize_baseline(p, "wwcy", grid=201)
    dt = time.perf_counter() - t0
    k, w = float(knmd.r1), float(wwcy.r1)
    ok = (abs(k - 0.687) <= 0.02 and abs(w - 0.738) <= 0.02
          and Fraction(2, 3) < knmd.r1 < wwcy.r1 and dt < 10)
    assert report(8, ok, f"KNMD R1={k:.4f} (target 0.687) WWCY R1={w:.4f} (target 0.738)", dt)


def test_c9_sweep_orderings():
    t0 = time.perf_counter()
    rows = sweep_compare(40, 20, 10000, SWEEP_TARGETS)
    dt = time.perf_counter() - t0
    failures = []
    for i in range(0, len(rows), 5):
        pt = {r.scheme: r for r in rows[i:i + 5]}
        g, others = pt["thm2"], [r for r in rows[i:i + 5] if r.scheme != "thm2"]
        if any(g.R1 > r.R1 for r in others):
            failures.append((g.params, "R1"))
        if any(g.R2 < r.R2 for r in others):
            failures.append((g.params, "R2"))
        if any(g.F < r.F for r in others):
            failures.append((g.params, "F max"))
        if pt["wwcy"].R2 != rc(g.m2_ratio, 20):
            failures.append((g.params, "wwcy R2"))
        if any(pt["scheme2"].F > r.F for r in others):
            failures.append((g.params, "scheme2 F min"))
    ok = not failures and len(rows) == 5 * len(SWEEP_TARGETS)
    assert report(9, ok, f"{len(SWEEP_TARGETS)} points checked, failures={failures[:3]}", dt)


def _scramble(p, rng):
    a = p.cells[rng.permutation(p.F)][:, rng.permutation(p.K)]
    labels = np.unique(a[a != STAR])
    new = rng.choice(np.arange(1, 10 * len(labels) + 2), size=len(labels), replace=False)
    lut = dict(zip(labels.tolist(), new.tolist()))
    return Pda.from_grid(np.vectorize(lambda x: lut.get(int(x), STAR))(a))


def _random_pda(rng, kmax):
    if rng.random() < 0.25:
        p = partition_pda(*[(2, 1), (2, 2), (3, 1)][rng.integers(3)])
    else:
        K = int(rng.integers(2, kmax + 1))
        p = mn_pda(K, int(rng.integers(1, K)))
    return _scramble(p, rng)


def _disjoint(B, C):
    h = hybrid_hpda(B, C)
    Br = B.relabeled()
    blocks = []
    for k1 in range(Br.K):
        for f1 in range(Br.F):
            blk = h.sub[k1][f1 * C.F:(f1 + 1) * C.F]
            s = int(Br.cells[f1, k1])
            key = ("I1", s) if s != STAR else ("I2", k1, f1)
            blocks.append((key, set(blk[blk != STAR].tolist())))
    # blocks from the same outer label share all labels; every other pair shares none
    return all(bool(la & lb) == (ka == kb) for (ka, la), (kb, lb) in itertools.combinations(blocks, 2))


def test_c10_block_disjointness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    good = sum(_disjoint(_random_pda(rng, 5), _random_pda(rng, 4)) for _ in range(50))
    dt = time.perf_counter() - t0
    assert report(10, good == 50, f"{good}/50 random hybrids have disjoint inner blocks", dt)
