"""Hierarchical PDAs: the composite type, its verifier, and two constructions.

``a0`` is an F x K1 boolean array (True = star, False = null). ``sub[k1]`` is
the F x K2 grid serving the users attached to mirror k1, with the same
star/label encoding as plain PDAs. Indices are 0-based in code; the text
format and violation messages use 1-based positions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .pda import (
    FORMAT_HEADER,
    STAR,
    Pda,
    Violation,
    as_grid,
    format_grid,
    mn_pda,
    pda_violations,
)


class InvalidHpdaError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} violation(s): {head}")


@dataclass(frozen=True)
class HpdaParams:
    K1: int
    K2: int
    F: int
    Z1: int
    Z2: int


@dataclass(frozen=True)
class HpdaStats:
    n_sm: int
    n_sk: tuple[int, ...]
    n_sm_sk: tuple[int, ...]
    n_union: int


@dataclass(frozen=True, eq=False)
class Hpda:
    a0: np.ndarray
    sub: tuple[np.ndarray, ...]
    s_m: frozenset
    s_k: tuple[frozenset, ...]

    @classmethod
    def build(cls, a0, sub, s_m=None, s_k=None) -> "Hpda":
        """Normalize inputs. Missing s_k defaults to the labels present in each sub-array."""
        a0 = np.asarray(a0, dtype=bool).copy()
        a0.flags.writeable = False
        subs = tuple(as_grid(g) for g in sub)
        if a0.ndim != 2 or len(subs) != a0.shape[1]:
            raise ValueError(f"a0 has {a0.shape[1] if a0.ndim == 2 else '?'} columns but {len(subs)} sub-arrays given")
        shapes = {g.shape for g in subs}
        if len(shapes) != 1 or next(iter(shapes))[0] != a0.shape[0]:
            raise ValueError("sub-arrays must share one shape with as many rows as a0")
        if s_k is None:
            s_k = [set(np.unique(g[g != STAR]).tolist()) for g in subs]
        s_k = tuple(frozenset(int(x) for x in s) for s in s_k)
        s_m = frozenset(int(x) for x in (s_m or ()))
        return cls(a0, subs, s_m, s_k)

    @property
    def K1(self):
        return self.a0.shape[1]

    @property
    def K2(self):
        return self.sub[0].shape[1]

    @property
    def F(self):
        return self.a0.shape[0]

    @property
    def params(self) -> HpdaParams:
        return HpdaParams(self.K1, self.K2, self.F, int(self.a0[:, 0].sum()), int((self.sub[0][:, 0] == STAR).sum()))

    @cached_property
    def cells_by_label(self) -> dict[int, list[tuple[int, int, int]]]:
        """label -> list of (k1, j, k2) cells, in (k1, j, k2) order."""
        out: dict[int, list[tuple[int, int, int]]] = {}
        for k1, g in enumerate(self.sub):
            js, ks = np.nonzero(g != STAR)
            for j, k2 in zip(js.tolist(), ks.tolist()):
                out.setdefault(int(g[j, k2]), []).append((k1, j, k2))
        return out

    @cached_property
    def union_labels(self) -> frozenset:
        return frozenset().union(*self.s_k)

    def __eq__(self, other):
        return (
            isinstance(other, Hpda)
            and np.array_equal(self.a0, other.a0)
            and len(self.sub) == len(other.sub)
            and all(np.array_equal(x, y) for x, y in zip(self.sub, other.sub))
            and self.s_m == other.s_m
            and self.s_k == other.s_k
        )

    __hash__ = None

    def to_text(self) -> str:
        return format_hpda(self)


def hpda_violations(h: Hpda) -> list[Violation]:
    out: list[Violation] = []
    a0 = h.a0
    # B1
    z1 = int(a0[:, 0].sum())
    for k1 in range(h.K1):
        n = int(a0[:, k1].sum())
        if n != z1:
            out.append(Violation("B1", (), (k1,), f"mirror column has {n} stars, expected {z1}"))
    # B2 plus the s_k bookkeeping
    z2 = int((h.sub[0][:, 0] == STAR).sum())
    for k1, g in enumerate(h.sub):
        for v in pda_violations(g):
            out.append(Violation("B2/" + v.condition, v.rows, v.cols, f"sub-array {k1 + 1}: {v.detail}"))
        n = int((g[:, 0] == STAR).sum())
        if n != z2:
            out.append(Violation("B2/Z", (), (0,), f"sub-array {k1 + 1} has {n} stars per column, expected {z2}"))
        present = set(np.unique(g[g != STAR]).tolist())
        if present != set(h.s_k[k1]):
            out.append(Violation("SK", (), (), f"s_k[{k1 + 1}] differs from labels present in sub-array {k1 + 1}"))
    cells = h.cells_by_label
    # B3
    for s in sorted(h.s_m):
        where = cells.get(s, [])
        owners = sorted({k1 for k1, _, _ in where})
        if len(owners) != 1:
            out.append(Violation("B3", (), tuple(owners), f"label {s} in S_M occurs in {len(owners)} sub-arrays"))
        for k1, j, k2 in where:
            if not a0[j, k1]:
                out.append(Violation("B3", (j,), (k1,), f"label {s} in S_M sits on a null mirror row"))
    # B4
    for s, where in cells.items():
        for (k1, j, k2), (l1, i, l2) in itertools.combinations(where, 2):
            if k1 == l1:
                continue
            if h.sub[k1][i, k2] != STAR and not a0[i, k1]:
                out.append(Violation("B4", (i,), (k1,), f"label {s}: sub-array {k1 + 1} has an integer at row {i + 1}, column {k2 + 1} without a mirror star"))
            if h.sub[l1][j, l2] != STAR and not a0[j, l1]:
                out.append(Violation("B4", (j,), (l1,), f"label {s}: sub-array {l1 + 1} has an integer at row {j + 1}, column {l2 + 1} without a mirror star"))
    return out


def verify_hpda(h: Hpda) -> HpdaParams:
    bad = hpda_violations(h)
    if bad:
        raise InvalidHpdaError(bad)
    return h.params


def hpda_stats(h: Hpda) -> HpdaStats:
    return HpdaStats(
        n_sm=len(h.s_m),
        n_sk=tuple(len(s) for s in h.s_k),
        n_sm_sk=tuple(len(s & h.s_m) for s in h.s_k),
        n_union=len(h.union_labels),
    )


def grouping_hpda(K1: int, K2: int, t: int) -> Hpda:
    """Grouping construction from the MN PDA on K1*K2 users.

    Column block k1 of the MN PDA becomes sub-array k1. A row that is all-star
    within a block becomes a mirror star, and its star cells get fresh labels
    numbered from C(K1K2, t+1)+1 (blocks in order, rows in lex order, columns
    left to right).
    """
    if K1 < 1 or K2 < 1 or not (K2 <= t <= K1 * K2):
        raise ValueError(f"grouping needs K2 <= t <= K1*K2, got K1={K1}, K2={K2}, t={t}")
    B = mn_pda(K1 * K2, t).cells
    F = B.shape[0]
    nxt = comb(K1 * K2, t + 1) + 1
    a0 = np.zeros((F, K1), dtype=bool)
    subs, s_m = [], set()
    for k1 in range(K1):
        blk = B[:, k1 * K2:(k1 + 1) * K2].copy()
        star_rows = np.all(blk == STAR, axis=1)
        a0[:, k1] = star_rows
        for j in np.nonzero(star_rows)[0]:
            for k2 in range(K2):
                blk[j, k2] = nxt
                s_m.add(nxt)
                nxt += 1
        subs.append(blk)
    return Hpda.build(a0, subs, s_m)


def _star_order(col: np.ndarray) -> dict[int, int]:
    """1-based position of each star row among the stars of a column."""
    return {int(j): i + 1 for i, j in enumerate(np.nonzero(col == STAR)[0])}


def hybrid_hpda(B: Pda, C: Pda) -> Hpda:
    """Hybrid construction from an outer PDA B (K1 columns) and inner PDA C (K2 columns).

    Row (f1, f2) of the result is row f1*F2 + f2 (0-based). An integer s of B
    becomes C shifted by (s-1)*S2. A star of B at (f1, k1) becomes C shifted by
    ((k1-1)*Z1 + order - 1 + S1)*S2, where order is the 1-based rank of f1
    among the stars of column k1. Labels of B and C are first mapped onto 1..S.
    """
    B = B.relabeled()
    C = C.relabeled()
    K1, F1, Z1, S1 = B.K, B.F, B.Z, B.S
    K2, F2, S2 = C.K, C.F, C.S
    b, c = B.cells, C.cells
    cstar = c == STAR
    a0 = np.repeat(b == STAR, F2, axis=0)
    subs = []
    s_m = set()
    for k1 in range(K1):
        order = _star_order(b[:, k1])
        blocks = []
        for f1 in range(F1):
            s = int(b[f1, k1])
            if s != STAR:
                shift = (s - 1) * S2
            else:
                shift = (k1 * Z1 + order[f1] - 1 + S1) * S2
            blk = np.where(cstar, STAR, c + shift)
            if s == STAR:
                s_m.update(np.unique(blk[~cstar]).tolist())
            blocks.append(blk)
        subs.append(np.vstack(blocks))
    return Hpda.build(a0, subs, s_m)


# text format

def _fmt_set(s) -> str:
    return " ".join(str(x) for x in sorted(s))


def format_hpda(h: Hpda) -> str:
    p = h.params
    lines = [FORMAT_HEADER, f"HPDA {p.K1} {p.K2} {p.F} {p.Z1} {p.Z2}"]
    lines += [" ".join("*" if x else "." for x in row) for row in h.a0]
    for g in h.sub:
        lines.append("")
        lines += format_grid(g)
    lines.append("")
    lines.append(f"SM: {_fmt_set(h.s_m)}".rstrip())
    for k1, s in enumerate(h.s_k):
        lines.append(f"S{k1 + 1}: {_fmt_set(s)}".rstrip())
    return "\n".join(lines) + "\n"


def parse_hpda(text: str) -> Hpda:
    lines = [ln.rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip() != FORMAT_HEADER and not ln.startswith("#")]
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines or not lines[0].startswith("HPDA"):
        raise ValueError("missing 'HPDA K1 K2 F Z1 Z2' header")
    head = lines[0].split()
    if len(head) != 6:
        raise ValueError(f"bad header: {lines[0]!r}")
    K1, K2, F, Z1, Z2 = map(int, head[1:])
    body = lines[1:]
    sets: dict[str, set] = {}
    grids: list[list[list[str]]] = [[]]
    for ln in body:
        if ":" in ln:
            key, _, vals = ln.partition(":")
            sets[key.strip()] = {int(x) for x in vals.split()}
        elif not ln.strip():
            if grids[-1]:
                grids.append([])
        else:
            grids[-1].append(ln.split())
    grids = [g for g in grids if g]
    if len(grids) != K1 + 1:
        raise ValueError(f"expected {K1 + 1} grids (mirror part and {K1} sub-arrays), found {len(grids)}")
    a0_rows = grids[0]
    if any(tok not in ("*", ".") for r in a0_rows for tok in r):
        raise ValueError("mirror grid may only contain '*' and '.'")
    a0 = [[tok == "*" for tok in r] for r in a0_rows]
    if "SM" not in sets:
        raise ValueError("missing SM line")
    s_k = [sets.get(f"S{k + 1}") for k in range(K1)]
    if any(s is None for s in s_k):
        raise ValueError("missing one of the S<k> lines")
    h = Hpda.build(a0, grids[1:], sets["SM"], s_k)
    if h.params != HpdaParams(K1, K2, F, Z1, Z2):
        raise ValueError(f"header {K1, K2, F, Z1, Z2} disagrees with grid parameters {h.params}")
    return h
