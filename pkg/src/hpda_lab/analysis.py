"""Closed-form loads, memory ratios and subpacketization, plus baseline schemes and sweeps.

Exact values are ``fractions.Fraction``. Subpacketization is kept as an exact
Python integer (big ints make log-gamma unnecessary) with ``log10_F`` for display.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Iterable, Sequence

from .hpda import Hpda, hpda_stats

CSV_COLUMNS = ["scheme", "mode", "K1", "K2", "N", "t_or_params", "m1_ratio", "m2_ratio", "F_or_log10F", "R1", "R2"]


class Infeasible(ValueError):
    pass


def _frac(x):
    return x if isinstance(x, Fraction) else Fraction(x)


def mn_point_load(K: int, t: int) -> Fraction:
    return Fraction(K - t, t + 1)


def rc(mu, K: int) -> Fraction:
    """MN load at memory ratio mu, with memory sharing between adjacent lattice points."""
    return _rc(_frac(mu), K)


@lru_cache(maxsize=1 << 16)
def _rc(mu: Fraction, K: int) -> Fraction:
    if not (0 <= mu <= 1):
        raise Infeasible(f"memory ratio {mu} outside [0, 1]")
    x = mu * K
    t0 = math.floor(x)
    if t0 >= K:
        return Fraction(0)
    w = x - t0
    return (1 - w) * mn_point_load(K, t0) + w * mn_point_load(K, t0 + 1)


def rc_formula(mu, K: int) -> Fraction:
    """K(1-mu)/(1+K mu) evaluated as written, also off the lattice."""
    mu = _frac(mu)
    if not (0 <= mu <= 1):
        raise Infeasible(f"memory ratio {mu} outside [0, 1]")
    return K * (1 - mu) / (1 + K * mu)


# memory sharing over an arbitrary family of (ratio, load, F) points

@dataclass(frozen=True)
class SharingCurve:
    points: tuple  # (ratio, load, F) on the lower convex hull, sorted by ratio

    @classmethod
    def hull(cls, pts: Iterable[tuple]) -> "SharingCurve":
        pts = sorted({(Fraction(r), Fraction(l), f) for r, l, f in pts}, key=lambda p: (p[0], p[1], p[2]))
        best: dict = {}
        for r, l, f in pts:  # one point per ratio: lowest load, then smallest F
            if r not in best or (l, f) < best[r][1:]:
                best[r] = (r, l, f)
        out: list = []
        for p in sorted(best.values()):
            while len(out) >= 2:
                (x1, y1, _), (x2, y2, _) = out[-2], out[-1]
                if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                    out.pop()
                else:
                    break
            out.append(p)
        return cls(tuple(out))

    def __call__(self, mu) -> tuple[Fraction, int]:
        """(load, F) at ratio mu. Off the hull vertices F is the sum of both endpoints' F."""
        mu = _frac(mu)
        pts = self.points
        if not (pts[0][0] <= mu <= pts[-1][0]):
            raise Infeasible(f"memory ratio {mu} outside [{pts[0][0]}, {pts[-1][0]}]")
        for (x1, y1, f1), (x2, y2, f2) in zip(pts, pts[1:]):
            if mu == x1:
                return y1, f1
            if x1 < mu < x2:
                w = (mu - x1) / (x2 - x1)
                return (1 - w) * y1 + w * y2, f1 + f2
        return pts[-1][1], pts[-1][2]


def mn_curve(K: int) -> SharingCurve:
    return SharingCurve.hull((Fraction(t, K), mn_point_load(K, t), comb(K, t)) for t in range(K + 1))


def partition_curve(K: int) -> SharingCurve:
    """Partition PDA family: for qp | K with m = K/qp - 1 >= 1, ratio 1/qp, load qp-1, F = qp^m.

    Parameters come from the family's closed form; small members are checked
    against the verifier in the tests.
    """
    pts = [(Fraction(0), Fraction(K), 1), (Fraction(1), Fraction(0), 1)]
    for qp in range(2, K + 1):
        if K % qp == 0 and K // qp - 1 >= 1:
            pts.append((Fraction(1, qp), Fraction(qp - 1), qp ** (K // qp - 1)))
    return SharingCurve.hull(pts)


# baselines

@dataclass(frozen=True)
class SystemParams:
    K1: int
    K2: int
    N: int
    M1: Fraction
    M2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "M1", _frac(self.M1))
        object.__setattr__(self, "M2", _frac(self.M2))
        if not (0 <= self.M1 <= self.N and 0 <= self.M2 <= self.N):
            raise ValueError("memory sizes must lie in [0, N]")


@dataclass(frozen=True)
class SplitParams:
    alpha: Fraction
    beta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frac(self.alpha))
        object.__setattr__(self, "beta", _frac(self.beta))
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must lie in [0, 1]")


def _split_args(p: SystemParams, s: SplitParams):
    a, b, N = s.alpha, s.beta, p.N
    first = (p.M1 / (a * N), b * p.M2 / (a * N)) if a > 0 else None
    second = (1 - b) * p.M2 / ((1 - a) * N) if a < 1 else None
    for x in (first or ()) + ((second,) if second is not None else ()):
        if x > 1:
            raise Infeasible(f"split {s} gives memory ratio {x} > 1")
    return a, first, second


def knmd_loads(p: SystemParams, s: SplitParams, r: Callable = rc) -> tuple[Fraction, Fraction]:
    a, first, second = _split_args(p, s)
    r1 = r2 = Fraction(0)
    if first is not None:
        r1 += a * p.K2 * r(first[0], p.K1)
        r2 += a * r(first[1], p.K2)
    if second is not None:
        r1 += (1 - a) * r(second, p.K1 * p.K2)
        r2 += (1 - a) * r(second, p.K2)
    return r1, r2


def wwcy_loads(p: SystemParams, s: SplitParams, r: Callable = rc) -> tuple[Fraction, Fraction]:
    a, first, second = _split_args(p, s)
    r1 = r2 = Fraction(0)
    if first is not None:
        r1 += a * r(first[0], p.K1) * r(first[1], p.K2)
        r2 += a * r(first[1], p.K2)
    if second is not None:
        r1 += (1 - a) * r(second, p.K1 * p.K2)
        r2 += (1 - a) * r(second, p.K2)
    return r1, r2


@dataclass(frozen=True)
class BaselineOptimum:
    split: SplitParams
    r1: Fraction
    r2: Fraction
    grid: int
    feasible_points: int
    pareto: tuple = ()


def _float_rc(r: Callable) -> Callable:
    if r is rc:
        def f(mu, K):
            if mu > 1 + 1e-12:
                raise Infeasible
            x = mu * K
            t0 = min(math.floor(x + 1e-12), K)
            if t0 >= K:
                return 0.0
            w = x - t0
            return (1 - w) * (K - t0) / (t0 + 1) + w * (K - t0 - 1) / (t0 + 2)
        return f
    if r is rc_formula:
        return lambda mu, K: K * (1 - mu) / (1 + K * mu)
    return lambda mu, K: float(r(Fraction(mu).limit_denominator(10**9), K))


def _loads_float(scheme: str, p: SystemParams, a: float, b: float, r: Callable):
    N, M1, M2 = p.N, float(p.M1), float(p.M2)
    r1 = r2 = 0.0
    if a > 0:
        u, v = M1 / (a * N), b * M2 / (a * N)
        if u > 1 + 1e-12 or v > 1 + 1e-12:
            return None
        rv = r(v, p.K2)
        r1 += a * (p.K2 * r(u, p.K1) if scheme == "knmd" else r(u, p.K1) * rv)
        r2 += a * rv
    if a < 1:
        w = (1 - b) * M2 / ((1 - a) * N)
        if w > 1 + 1e-12:
            return None
        r1 += (1 - a) * r(w, p.K1 * p.K2)
        r2 += (1 - a) * r(w, p.K2)
    return r1, r2


def optimize_baseline(p: SystemParams, scheme: str = "knmd", objective: str = "R1", grid: int = 201,
                      r: Callable = rc, pareto: bool = False) -> BaselineOptimum:
    """Exhaustive search on a grid x grid lattice of (alpha, beta).

    The scan runs in floating point. Every point within 1e-9 of the float
    minimum is then re-evaluated exactly, and ties break toward smaller alpha,
    then smaller beta.
    """
    if grid < 100:
        raise ValueError("grid resolution must be at least 100 points per axis")
    scheme = scheme.lower()
    fn = {"knmd": knmd_loads, "wwcy": wwcy_loads}[scheme]
    idx = {"R1": 0, "R2": 1}[objective]
    fr = _float_rc(r)
    n = grid - 1
    scan = []
    for i in range(grid):
        for k in range(grid):
            loads = _loads_float(scheme, p, i / n, k / n, fr)
            if loads is not None:
                scan.append((loads, i, k))
    if not scan:
        raise Infeasible("no feasible (alpha, beta) on the grid")
    lo = min(x[0][idx] for x in scan)
    best = None
    for _, i, k in (x for x in scan if x[0][idx] <= lo + 1e-9):
        s = SplitParams(Fraction(i, n), Fraction(k, n))
        try:
            loads = fn(p, s, r)
        except Infeasible:
            continue
        if best is None or loads[idx] < best[0][idx]:
            best = (loads, s)
    front = ()
    if pareto:
        front_l, top = [], None
        for (l1, l2), i, k in sorted(scan, key=lambda x: (x[0][0], x[0][1])):
            if top is None or l2 < top:
                front_l.append(((l1, l2), SplitParams(Fraction(i, n), Fraction(k, n))))
                top = l2
        front = tuple(front_l)
    return BaselineOptimum(best[1], best[0][0], best[0][1], grid, len(scan), front)


# proposed schemes

@dataclass(frozen=True)
class PerfRecord:
    scheme: str
    mode: str
    m1_ratio: Fraction
    m2_ratio: Fraction
    F: int
    R1: Fraction
    R2: Fraction
    params: str = ""

    @property
    def log10_F(self) -> float:
        return math.log10(self.F)


def _mode(mode) -> str:
    mode = getattr(mode, "value", mode)
    if mode not in ("plain", "sp"):
        raise ValueError(f"mode must be 'plain' or 'sp', got {mode!r}")
    return mode


def hpda_perf(h: Hpda, N: int, mode="plain", blind: bool = False) -> PerfRecord:
    """Performance of the scheme built from any HPDA, from its set cardinalities."""
    mode = _mode(mode)
    st = hpda_stats(h)
    p = h.params
    F = p.F
    m1, m2 = Fraction(p.Z1, F), Fraction(p.Z2, F)
    if mode == "sp":
        m1 += Fraction(max(st.n_sm_sk), N * F)
        m2 += Fraction(F - p.Z2, N * F)
    sent = st.n_union if blind else st.n_union - st.n_sm
    return PerfRecord("hpda", mode, m1, m2, F, Fraction(sent, F), Fraction(max(st.n_sk), F))


def thm2_perf(K1: int, K2: int, t: int, N: int, mode="plain") -> PerfRecord:
    """Grouping construction with the MN PDA on K1*K2 users."""
    mode = _mode(mode)
    if not (K2 <= t <= K1 * K2):
        raise ValueError(f"need K2 <= t <= K1*K2, got K1={K1}, K2={K2}, t={t}")
    K = K1 * K2
    F = comb(K, t)
    z1 = comb(K - K2, t - K2)
    z2 = comb(K - 1, t - 1) - z1
    m1, m2 = Fraction(z1, F), Fraction(z2, F)
    if mode == "sp":
        m1 += Fraction(K2 * z1, N * F)
        m2 += Fraction(F - z2, N * F)
    # server sends every original MN label, mirrors add K2 fresh labels per star row
    r1 = Fraction(comb(K, t + 1), F)
    r2 = Fraction(K - t, t + 1) - Fraction(comb(K - K2, t + 1), F) + Fraction(K2 * z1, F)
    return PerfRecord("thm2", mode, m1, m2, F, r1, r2, f"t={t}")


def thm3_perf(b: Sequence[int], c: Sequence[int], N: int, mode="plain") -> PerfRecord:
    """Hybrid construction from outer (K1,F1,Z1,S1) and inner (K2,F2,Z2,S2) PDA parameters."""
    mode = _mode(mode)
    K1, F1, Z1, S1 = b
    K2, F2, Z2, S2 = c
    m1, m2 = Fraction(Z1, F1), Fraction(Z2, F2)
    if mode == "sp":
        m1 += Fraction(Z1 * S2, N * F1 * F2)
        m2 += Fraction(F2 - Z2, F2 * N)
    return PerfRecord("thm3", mode, m1, m2, F1 * F2, Fraction(S1 * S2, F1 * F2), Fraction(S2, F2),
                      f"B={tuple(b)} C={tuple(c)}")


def lower_bound_r1(K1: int, K2: int, t: int) -> Fraction:
    if not (0 <= t <= K1 * K2):
        raise ValueError("t must lie in [0, K1*K2]")
    return Fraction(K1 * K2 - t, t + 1)


# sweeps

SWEEP_TARGETS = tuple(Fraction(i, 10) for i in range(2, 10))


def _nearest_t(K1: int, K2: int, target: Fraction) -> int:
    K = K1 * K2
    return min(range(K2, K + 1), key=lambda t: (abs(Fraction(comb(K - K2, t - K2), comb(K, t)) - target), t))


def sweep_compare(K1: int, K2: int, N: int, targets: Sequence = SWEEP_TARGETS, mode="plain") -> list[PerfRecord]:
    """Rows for the grouping scheme and four baselines at matched memory ratios.

    For each target mirror ratio the grouping parameter t with the nearest
    mirror ratio is chosen; its (M1/N, M2/N) pair is then used for every other
    scheme with alpha = beta = 1. Off-lattice points use memory sharing.
    """
    mode = _mode(mode)
    mn1, mn2 = mn_curve(K1), mn_curve(K2)
    pt1, pt2 = partition_curve(K1), partition_curve(K2)
    rows = []
    for target in targets:
        t = _nearest_t(K1, K2, Fraction(target))
        g = thm2_perf(K1, K2, t, N, mode)
        m1, m2 = g.m1_ratio, g.m2_ratio
        rows.append(g)
        a1, f1 = mn1(m1)
        a2, f2 = mn2(m2)
        b1, e1 = pt1(m1)
        b2, e2 = pt2(m2)
        tag = f"t={t}"
        rows.append(PerfRecord("knmd", mode, m1, m2, f1 * f2, K2 * a1, a2, tag))
        rows.append(PerfRecord("wwcy", mode, m1, m2, f1 * f2, a1 * a2, a2, tag))
        rows.append(PerfRecord("scheme1", mode, m1, m2, e1 * f2, b1 * a2, a2, tag))
        rows.append(PerfRecord("scheme2", mode, m1, m2, e1 * e2, b1 * b2, b2, tag))
    return rows


def _num(x) -> str:
    return f"{float(x):.10g}"


def perf_csv(rows: Iterable[PerfRecord], K1: int, K2: int, N: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        F = str(r.F) if r.F < 10**12 else f"log10={r.log10_F:.6f}"
        w.writerow([r.scheme, r.mode, K1, K2, N, r.params, _num(r.m1_ratio), _num(r.m2_ratio), F, _num(r.R1), _num(r.R2)])
    return buf.getvalue()
