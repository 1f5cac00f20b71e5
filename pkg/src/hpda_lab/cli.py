"""hpda-lab command line.

Exit codes: 0 success, 1 verification violation or nonzero secure audit,
2 invalid parameters or malformed input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import analysis
from .hpda import (
    Hpda,
    InvalidHpdaError,
    grouping_hpda,
    hpda_stats,
    hpda_violations,
    hybrid_hpda,
    parse_hpda,
)
from .pda import FORMAT_HEADER, InvalidPdaError, Pda, mn_pda, parse_pda, partition_pda
from .scheme import Delivery, DemandMatrix, Library, Mode, Randomness, SchemeInstance
from .sim import AuditSpec, BudgetExceeded, measure_loads, mi_audit, random_full_rank_demand, run_session

EXIT_OK, EXIT_VIOLATION, EXIT_PRECONDITION, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def _pda_spec(text: str) -> Pda:
    """Parse 'mn:K,t' or 'partition:qp,m'."""
    kind, _, args = text.partition(":")
    try:
        a, b = (int(x) for x in args.split(","))
    except ValueError:
        raise UsageError(f"bad PDA spec {text!r}; use mn:K,t or partition:qp,m")
    if kind == "mn":
        return mn_pda(a, b)
    if kind == "partition":
        return partition_pda(a, b)
    raise UsageError(f"unknown PDA family {kind!r}")


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise IOError(f"cannot read {path}: {e.strerror}") from e


def _write(path: str, text: str):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise IOError(f"cannot write {path}: {e.strerror}") from e


def _load_hpda(path: str) -> Hpda:
    return parse_hpda(_read(path))


def _perf_lines(p: analysis.PerfRecord) -> list[str]:
    return [
        f"predicted[{p.scheme},{p.mode}]: m1={_frac(p.m1_ratio)} m2={_frac(p.m2_ratio)} F={p.F} R1={_frac(p.R1)} R2={_frac(p.R2)}",
    ]


def cmd_construct(a) -> int:
    if a.method == "grouping":
        if None in (a.k1, a.k2, a.t):
            raise UsageError("grouping needs --k1, --k2 and --t")
        h = grouping_hpda(a.k1, a.k2, a.t)
        preds = [analysis.thm2_perf(a.k1, a.k2, a.t, a.n or a.k1 * a.k2, m) for m in ("plain", "sp")]
    else:
        if not (a.outer and a.inner):
            raise UsageError("hybrid needs --outer and --inner")
        B, C = _pda_spec(a.outer), _pda_spec(a.inner)
        h = hybrid_hpda(B, C)
        bp, cp = (B.K, B.F, B.Z, B.S), (C.K, C.F, C.Z, C.S)
        preds = [analysis.thm3_perf(bp, cp, a.n or h.K1 * h.K2, m) for m in ("plain", "sp")]
    st = hpda_stats(h)
    text = h.to_text()
    if a.out:
        _write(a.out, text)
    else:
        sys.stdout.write(text.split("\n", 1)[1])
    print(f"stats: |SM|={st.n_sm} |Sk|={list(st.n_sk)} |SM&Sk|={list(st.n_sm_sk)} |union|={st.n_union}")
    for p in preds:
        print(*_perf_lines(p), sep="\n")
    return EXIT_OK


def cmd_verify(a) -> int:
    text = _read(a.path)
    body = [ln for ln in text.splitlines() if ln.strip() and ln.strip() != FORMAT_HEADER]
    if body and body[0].startswith("PDA"):
        try:
            p = parse_pda(text)
        except InvalidPdaError as e:
            for v in e.violations:
                print(f"violation: {v}")
            return EXIT_VIOLATION
        print(f"ok PDA K={p.K} F={p.F} Z={p.Z} S={p.S}")
        return EXIT_OK
    try:
        h = parse_hpda(text)
    except InvalidPdaError as e:
        for v in e.violations:
            print(f"violation: {v}")
        return EXIT_VIOLATION
    bad = hpda_violations(h)
    for v in bad:
        print(f"violation: {v}")
    if bad:
        return EXIT_VIOLATION
    p = h.params
    print(f"ok HPDA K1={p.K1} K2={p.K2} F={p.F} Z1={p.Z1} Z2={p.Z2}")
    return EXIT_OK


def _require_seed(a):
    if a.seed is None:
        raise UsageError("--seed is required for randomized commands")


def cmd_simulate(a) -> int:
    _require_seed(a)
    h = _load_hpda(a.path)
    bad = hpda_violations(h)
    if bad:
        raise UsageError(f"input is not a valid HPDA: {bad[0]}")
    n = a.n if a.n is not None else h.K1 * h.K2
    b = a.b if a.b is not None else h.F
    inst = SchemeInstance(h, n, a.q, b, Mode(a.mode), Delivery(a.delivery))
    rng = np.random.default_rng(a.seed)
    lib = Library.random(inst, rng)
    rand = Randomness.sample(inst, rng) if inst.secure else None
    if a.demand == "unit":
        D = DemandMatrix.unit(h.K1, h.K2, n)
    else:
        D = random_full_rank_demand(h.K1, h.K2, n, a.q, rng)
    t = run_session(inst, lib, rand, D)
    if a.transcript:
        _write(a.transcript, t.to_log())
    r1, r2 = measure_loads(t, h.F)
    pay1 = sum(1 for e in t.layer1 if e.kind == "payload")
    pay2 = [sum(1 for e in em if e.kind == "payload") for em in t.layer2]
    print(f"session: mode={inst.mode.value} delivery={inst.delivery.value} N={n} q={a.q} B={b} F={h.F} seed={a.seed}")
    print(f"layer1: {pay1} signals, {len(t.layer1) - pay1} metadata; layer2: {pay2} signals per mirror")
    print(f"memory: M1/N={_frac(t.memory[0])} M2/N={_frac(t.memory[1])}")
    print(f"digest: {t.digest()}")
    print(f"R1={_frac(r1)} R2={_frac(r2)} decode={'OK' if t.all_decoded else 'FAIL'}")
    return EXIT_OK if t.all_decoded else EXIT_VIOLATION


def _index_set(text: str | None) -> frozenset:
    if not text:
        return frozenset()
    try:
        return frozenset(int(x) - 1 for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad index list {text!r}; use 1-based comma-separated integers")


def cmd_audit(a) -> int:
    h = _load_hpda(a.path)
    spec = AuditSpec(
        h, a.q, a.n, a.target, Mode(a.mode), Delivery(a.delivery),
        t1=_index_set(a.t1), t2=_index_set(a.t2), joint_mirrors=not a.per_link, budget=a.budget,
    )
    r = mi_audit(spec, workers=a.workers)
    sys.stdout.write(r.report())
    print(f"MI={r.mi_text()}")
    if spec.secure and not r.is_zero:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_compare(a) -> int:
    if a.grid < 2:
        raise UsageError("--grid needs at least 2 points")
    lo, hi = Fraction(2, 10), Fraction(9, 10)
    targets = [lo + (hi - lo) * i / (a.grid - 1) for i in range(a.grid)]
    rows = analysis.sweep_compare(a.k1, a.k2, a.n, targets, a.mode)
    text = analysis.perf_csv(rows, a.k1, a.k2, a.n)
    if a.out:
        _write(a.out, text)
        print(f"wrote {len(rows)} rows to {a.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_demo(a) -> int:
    h = grouping_hpda(2, 2, 2)
    print("grouping HPDA for K1=K2=t=2:")
    sys.stdout.write(h.to_text().split("\n", 1)[1])
    for mode in (Mode.PLAIN, Mode.SECURE_PRIVATE):
        inst = SchemeInstance(h, 24, a.q, 6, mode)
        rng = np.random.default_rng(a.seed if a.seed is not None else 0)
        lib = Library.random(inst, rng)
        rand = Randomness.sample(inst, rng) if inst.secure else None
        t = run_session(inst, lib, rand, DemandMatrix.unit(2, 2, 24))
        r1, r2 = measure_loads(t, h.F)
        print(f"[{mode.value}] M1/N={_frac(t.memory[0])} M2/N={_frac(t.memory[1])} R1={_frac(r1)} R2={_frac(r2)} "
              f"decode={'OK' if t.all_decoded else 'FAIL'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpda-lab", description="Hierarchical placement delivery arrays and two-layer coded caching.")
    sub = ap.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("construct", help="build an HPDA")
    c.add_argument("--method", choices=["grouping", "hybrid"], required=True)
    c.add_argument("--k1", type=int)
    c.add_argument("--k2", type=int)
    c.add_argument("--t", type=int)
    c.add_argument("--outer", help="outer PDA, e.g. mn:2,1 or partition:2,2")
    c.add_argument("--inner", help="inner PDA, e.g. mn:3,1")
    c.add_argument("--n", type=int, help="file count used for the predicted memory ratios")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_construct)

    v = sub.add_parser("verify", help="check a PDA or HPDA file")
    v.add_argument("path")
    v.set_defaults(fn=cmd_verify)

    s = sub.add_parser("simulate", help="run one delivery session")
    s.add_argument("path")
    s.add_argument("--n", type=int)
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--b", type=int)
    s.add_argument("--mode", choices=[m.value for m in Mode], default="plain")
    s.add_argument("--delivery", choices=[d.value for d in Delivery], default="assisted")
    s.add_argument("--demand", choices=["unit", "random"], default="unit")
    s.add_argument("--transcript", help="write the line-oriented transcript log here")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_simulate)

    au = sub.add_parser("audit", help="exact leakage audit on a tiny HPDA")
    au.add_argument("path")
    au.add_argument("--target", choices=["security1", "security2", "privacy1", "privacy2"], required=True)
    au.add_argument("--mode", choices=[m.value for m in Mode], default="sp")
    au.add_argument("--delivery", choices=[d.value for d in Delivery], default="assisted")
    au.add_argument("--q", type=int, default=2)
    au.add_argument("--n", type=int, default=2)
    au.add_argument("--t1", help="colluding mirrors, 1-based, comma-separated")
    au.add_argument("--t2", help="colluding user positions, 1-based, comma-separated")
    au.add_argument("--per-link", action="store_true", help="security2: tap one mirror link at a time")
    au.add_argument("--budget", type=int, default=2**26)
    au.add_argument("--workers", type=int, default=1)
    au.set_defaults(fn=cmd_audit)

    cp = sub.add_parser("compare", help="CSV of scheme performance at matched memory ratios")
    cp.add_argument("--k1", type=int, required=True)
    cp.add_argument("--k2", type=int, required=True)
    cp.add_argument("--n", type=int, required=True)
    cp.add_argument("--grid", type=int, default=8, help="number of mirror-memory points from 0.2 to 0.9")
    cp.add_argument("--mode", choices=["plain", "sp"], default="plain")
    cp.add_argument("--out")
    cp.set_defaults(fn=cmd_compare)

    d = sub.add_parser("demo", help="walk through the K1=K2=2 example in both modes")
    d.add_argument("--q", type=int, default=2)
    d.add_argument("--seed", type=int)
    d.set_defaults(fn=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    print(FORMAT_HEADER)
    try:
        return args.fn(args)
    except IOError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, InvalidHpdaError, BudgetExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
