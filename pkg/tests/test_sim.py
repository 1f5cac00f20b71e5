from fractions import Fraction

import numpy as np
import pytest

from hpda_lab.analysis import thm2_perf, thm3_perf
from hpda_lab.field import FieldCtx, matrix_rank
from hpda_lab.hpda import grouping_hpda, hybrid_hpda
from hpda_lab.pda import mn_pda
from hpda_lab.scheme import Delivery, DemandMatrix, Library, Mode, Randomness, SchemeInstance
from hpda_lab.sim import (
    AuditSpec,
    AuditTarget,
    BudgetExceeded,
    Transcript,
    formula_vs_sim,
    measure_loads,
    mi_audit,
    random_full_rank_demand,
    run_session,
)


def session(h, mode="plain", q=2, N=24, packet_len=1, seed=0, delivery="assisted"):
    inst = SchemeInstance(h, N, q, h.F * packet_len, Mode(mode), Delivery(delivery))
    rng = np.random.default_rng(seed)
    lib = Library.random(inst, rng)
    rand = Randomness.sample(inst, rng) if inst.secure else None
    return inst, run_session(inst, lib, rand, DemandMatrix.unit(h.K1, h.K2, N))


@pytest.mark.parametrize("mode", ["plain", "sp"])
def test_example_loads(mode):
    inst, t = session(grouping_hpda(2, 2, 2), mode, packet_len=3)
    assert measure_loads(t, 6) == (Fraction(2, 3), Fraction(1))
    assert sum(e.length for e in t.layer1 if e.kind == "payload") == 4 * 3
    assert [sum(1 for e in em if e.kind == "payload") for em in t.layer2] == [6, 6]
    assert all(e.length % t.packet_len == 0 for e in t.layer1 if e.kind == "payload")
    assert t.all_decoded


def test_metadata_is_excluded():
    _, t = session(grouping_hpda(2, 2, 2), "sp")
    meta = [e for e in t.layer1 if e.kind == "metadata"]
    assert len(meta) == 4 and all(e.length == 24 for e in meta)


def test_full_cache_and_fig4_loads():
    _, t = session(grouping_hpda(2, 2, 4), N=4)
    assert measure_loads(t, 1)[0] == 0
    _, t = session(hybrid_hpda(mn_pda(2, 1), mn_pda(3, 1)))
    assert measure_loads(t, 6) == (Fraction(1, 2), Fraction(1))


def test_empty_layer1():
    t = Transcript(packet_len=1, layer2=[[]])
    assert measure_loads(t, 3) == (0, 0)


def test_transcript_log_and_determinism():
    h = grouping_hpda(2, 2, 2)
    _, a = session(h, "sp", seed=5)
    _, b = session(h, "sp", seed=5)
    _, c = session(h, "sp", seed=6)
    assert a.to_log() == b.to_log() and a.digest() == b.digest()
    assert a.digest() != c.digest()
    lines = a.to_log().splitlines()
    assert lines[0] == "LAYER 1 SIGNAL q1,1 LEN 24 KIND metadata"
    assert "LAYER 1 SIGNAL s1 LEN 1 KIND payload" in lines
    assert "LAYER 2 SIGNAL m1/s5 LEN 1 KIND payload" in lines


def test_full_rank_demand():
    ctx = FieldCtx(2)
    for seed in range(50):
        D = random_full_rank_demand(2, 2, 24, 2, np.random.default_rng(seed))
        assert matrix_rank(D.rows, ctx) == 4
    D = random_full_rank_demand(1, 2, 2, 2, np.random.default_rng(0))
    assert matrix_rank(D.rows, ctx) == 2
    with pytest.raises(ValueError):
        random_full_rank_demand(2, 2, 3, 2, np.random.default_rng(0))


def test_full_rank_acceptance_rate():
    ctx = FieldCtx(2)
    ok = sum(matrix_rank(np.random.default_rng(s).integers(0, 2, size=(4, 8)), ctx) == 4 for s in range(1000))
    assert ok / 1000 > 0.9


@pytest.mark.parametrize("mode", ["plain", "sp"])
@pytest.mark.parametrize("delivery", ["assisted", "blind"])
def test_formula_vs_sim_general(mode, delivery):
    for h in [grouping_hpda(2, 2, 2), grouping_hpda(2, 2, 4), hybrid_hpda(mn_pda(2, 1), mn_pda(3, 1))]:
        chk = formula_vs_sim(h, 24, 3, mode, delivery, seed=1)
        assert chk.ok, chk


@pytest.mark.parametrize("mode", ["plain", "sp"])
def test_formula_vs_sim_closed_forms(mode):
    assert formula_vs_sim(grouping_hpda(2, 2, 2), 24, 2, mode, predicted=thm2_perf(2, 2, 2, 24, mode)).ok
    assert formula_vs_sim(grouping_hpda(2, 2, 4), 24, 2, mode, predicted=thm2_perf(2, 2, 4, 24, mode)).ok
    chk = formula_vs_sim(hybrid_hpda(mn_pda(2, 1), mn_pda(3, 1)), 24, 2, mode, predicted=thm3_perf((2, 2, 1, 1), (3, 3, 1, 3), 24, mode))
    assert chk.ok and chk.measured[2:4] == (Fraction(1, 2), Fraction(1))


# exact audits

TINY = hybrid_hpda(mn_pda(2, 1), mn_pda(2, 1))


def test_audit_budget_guard():
    spec = AuditSpec(TINY, 2, 2, "security1", budget=1000)
    assert spec.states() == 2**19
    with pytest.raises(BudgetExceeded):
        mi_audit(spec)


def test_plain_audit_has_power():
    r = mi_audit(AuditSpec(TINY, 2, 2, "security1", mode="plain"))
    assert not r.is_zero and r.mi > 0


def test_fixed_demand_model():
    D = DemandMatrix(np.array([[1, 0], [0, 1], [1, 0], [0, 1]]), 2)
    spec = AuditSpec(TINY, 2, 2, "security1", demand_model="fixed", demand=D)
    assert spec.states() == 2**15
    assert mi_audit(spec).is_zero


@pytest.mark.slow
@pytest.mark.parametrize("target,kw", [
    ("security1", {}),
    ("privacy1", {"t1": {0}}),
    ("privacy1", {"t1": {1}}),
    ("privacy2", {"t1": {0}, "t2": {0}}),
    ("privacy2", {"t1": {1}, "t2": {0, 1}}),
])
def test_secure_audits_are_zero(target, kw):
    r = mi_audit(AuditSpec(TINY, 2, 2, target, **kw))
    assert r.is_zero and r.mi_text() == "0/1"


@pytest.mark.slow
def test_security2_per_link_zero_joint_leaks():
    per = mi_audit(AuditSpec(TINY, 2, 2, "security2", joint_mirrors=False))
    assert per.is_zero and per.per_link == ((0, "0/1"), (1, "0/1"))
    # label 1 is served by both mirrors under the same pad, so the pair of links leaks
    joint = mi_audit(AuditSpec(TINY, 2, 2, "security2"))
    assert not joint.is_zero


@pytest.mark.slow
def test_parallel_matches_serial():
    spec = AuditSpec(TINY, 2, 2, "security1", mode="plain")
    assert mi_audit(spec, workers=2) == mi_audit(spec)
