"""Placement delivery arrays: type, verifier, MN construction, a partition family.

A grid is an F x K int64 array. ``STAR`` (0) marks a star, positive values are
integer labels. Labels need not be consecutive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

import numpy as np

STAR = 0
FORMAT_HEADER = "hpda-lab format v1"


@dataclass(frozen=True)
class Violation:
    condition: str
    rows: tuple = ()
    cols: tuple = ()
    detail: str = ""

    def __str__(self):
        r = ",".join(str(x + 1) for x in self.rows)
        c = ",".join(str(x + 1) for x in self.cols)
        return f"{self.condition} rows=[{r}] cols=[{c}] {self.detail}".rstrip()


class InvalidPdaError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{len(self.violations)} violation(s): {head}{more}")


@dataclass(frozen=True)
class PdaParams:
    K: int
    F: int
    Z: int
    S: int


def as_grid(grid) -> np.ndarray:
    """Coerce a nested sequence (ints, or '*' tokens) into an int64 cell array."""
    if isinstance(grid, np.ndarray):
        a = grid.astype(np.int64, copy=True)
    else:
        rows = [list(r) for r in grid]
        if not rows:
            raise ValueError("empty grid")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged grid")
        a = np.array([[STAR if c in ("*", None) else int(c) for c in r] for r in rows], dtype=np.int64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"grid must be a non-empty 2-D array, got shape {a.shape}")
    if np.any(a < 0):
        raise ValueError("grid entries must be star or positive integers")
    a.flags.writeable = False
    return a


def pda_violations(grid) -> list[Violation]:
    """All violations of the PDA conditions. Empty list means the grid is a PDA.

    C1: every column has as many stars as column 1.
    C3: two equal labels lie in distinct rows and columns and the two
        cross cells are stars.
    C2 holds by construction once S is taken to be the number of labels present.
    """
    a = as_grid(grid)
    out: list[Violation] = []
    stars = (a == STAR).sum(axis=0)
    z = int(stars[0])
    for k in np.nonzero(stars != z)[0]:
        out.append(Violation("C1", (), (int(k),), f"{int(stars[k])} stars, expected {z}"))
    for s, cells in _cells_by_label(a).items():
        for (j1, k1), (j2, k2) in itertools.combinations(cells, 2):
            if j1 == j2 or k1 == k2:
                out.append(Violation("C3a", (j1, j2), (k1, k2), f"label {s} repeated in a shared row or column"))
            elif a[j1, k2] != STAR or a[j2, k1] != STAR:
                out.append(Violation("C3b", (j1, j2), (k1, k2), f"label {s} lacks stars at the cross positions"))
    return out


def verify_pda(grid) -> PdaParams:
    """Return inferred (K, F, Z, S) or raise InvalidPdaError listing every violation."""
    a = as_grid(grid)
    bad = pda_violations(a)
    if bad:
        raise InvalidPdaError(bad)
    labels = np.unique(a[a != STAR])
    return PdaParams(K=a.shape[1], F=a.shape[0], Z=int((a[:, 0] == STAR).sum()), S=int(labels.size))


def _cells_by_label(a: np.ndarray) -> dict[int, list[tuple[int, int]]]:
    out: dict[int, list[tuple[int, int]]] = {}
    js, ks = np.nonzero(a != STAR)
    for j, k in zip(js.tolist(), ks.tolist()):
        out.setdefault(int(a[j, k]), []).append((j, k))
    return out


@dataclass(frozen=True, eq=False)
class Pda:
    """A verified PDA. Construct through ``Pda.from_grid`` or the builders below."""

    cells: np.ndarray
    params: PdaParams = field(compare=False)

    @classmethod
    def from_grid(cls, grid) -> "Pda":
        a = as_grid(grid)
        return cls(a, verify_pda(a))

    @property
    def K(self):
        return self.params.K

    @property
    def F(self):
        return self.params.F

    @property
    def Z(self):
        return self.params.Z

    @property
    def S(self):
        return self.params.S

    def labels(self) -> list[int]:
        return sorted(int(x) for x in np.unique(self.cells[self.cells != STAR]))

    def relabeled(self) -> "Pda":
        """Same PDA with labels mapped onto 1..S preserving order."""
        labels = self.labels()
        if labels == list(range(1, len(labels) + 1)):
            return self
        lut = {s: i + 1 for i, s in enumerate(labels)}
        a = np.array([[lut[int(c)] if c != STAR else STAR for c in row] for row in self.cells], dtype=np.int64)
        a.flags.writeable = False
        return Pda(a, self.params)

    def __eq__(self, other):
        return isinstance(other, Pda) and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash(self.cells.tobytes()) ^ hash(self.cells.shape)

    def to_text(self) -> str:
        return format_pda(self)


def pda_loads(p: Pda) -> tuple[Fraction, Fraction]:
    """(Z/F, S/F) as exact fractions."""
    return Fraction(p.Z, p.F), Fraction(p.S, p.F)


# subsets in lexicographic order, 1-based ranks

class SubsetRanker:
    def __init__(self, n: int, t: int):
        if not (0 <= t <= n):
            raise ValueError(f"need 0 <= t <= n, got n={n}, t={t}")
        self.n, self.t = n, t
        self.count = comb(n, t)

    def rank(self, subset: Iterable[int]) -> int:
        s = sorted(subset)
        if len(s) != self.t or len(set(s)) != self.t or (s and (s[0] < 1 or s[-1] > self.n)):
            raise ValueError(f"{s} is not a {self.t}-subset of [1..{self.n}]")
        r, prev = 0, 0
        for i, x in enumerate(s):
            rest = self.t - i - 1
            for y in range(prev + 1, x):
                r += comb(self.n - y, rest)
            prev = x
        return r + 1

    def unrank(self, r: int) -> tuple[int, ...]:
        if not (1 <= r <= self.count):
            raise ValueError(f"rank {r} outside [1, {self.count}]")
        r -= 1
        out, x = [], 1
        for i in range(self.t):
            rest = self.t - i - 1
            while comb(self.n - x, rest) <= r:
                r -= comb(self.n - x, rest)
                x += 1
            out.append(x)
            x += 1
        return tuple(out)


def subset_rank(subset: Iterable[int], n: int) -> int:
    subset = tuple(subset)
    return SubsetRanker(n, len(subset)).rank(subset)


def subset_unrank(r: int, n: int, t: int) -> tuple[int, ...]:
    return SubsetRanker(n, t).unrank(r)


def mn_pda(K: int, t: int) -> Pda:
    """MN PDA: rows are t-subsets, cell (T, k) is star when k is in T, else the rank of T + {k}."""
    if not (1 <= t <= K):
        raise ValueError(f"mn_pda needs 1 <= t <= K, got K={K}, t={t}")
    ranker = SubsetRanker(K, t + 1) if t < K else None
    rows = list(itertools.combinations(range(1, K + 1), t))
    a = np.zeros((len(rows), K), dtype=np.int64)
    for j, T in enumerate(rows):
        members = set(T)
        for k in range(1, K + 1):
            if k not in members:
                a[j, k - 1] = ranker.rank(members | {k})
    a.flags.writeable = False
    return Pda(a, PdaParams(K, len(rows), comb(K - 1, t - 1), comb(K, t + 1)))


def partition_pda(qp: int, m: int) -> Pda:
    """Low-subpacketization PDA with memory ratio 1/qp.

    Rows are vectors f in Z_qp^(m+1) whose last coordinate is the sum of the
    others. Columns are pairs (u, l). Cell (f, (u, l)) is a star when f_u = l,
    otherwise the label of the vector obtained from f by setting f_u = l.
    Gives K=(m+1)qp, F=qp^m, Z=qp^(m-1), S=qp^(m+1)-qp^m. The result is
    passed through the verifier before being returned.
    """
    if qp < 2 or m < 1:
        raise ValueError(f"partition_pda needs qp >= 2 and m >= 1, got qp={qp}, m={m}")
    heads = list(itertools.product(range(qp), repeat=m))
    rows = [h + (sum(h) % qp,) for h in heads]
    width = m + 1
    label_of: dict[tuple, int] = {}
    a = np.zeros((len(rows), width * qp), dtype=np.int64)
    for j, f in enumerate(rows):
        for u in range(width):
            for l in range(qp):
                if f[u] == l:
                    continue
                g = f[:u] + (l,) + f[u + 1:]
                a[j, u * qp + l] = label_of.setdefault(g, len(label_of) + 1)
    return Pda.from_grid(a)


# text format

def _tok(c) -> str:
    return "*" if c == STAR else str(int(c))


def format_grid(a: np.ndarray) -> list[str]:
    return [" ".join(_tok(c) for c in row) for row in a]


def format_pda(p: Pda) -> str:
    lines = [FORMAT_HEADER, f"PDA {p.K} {p.F} {p.Z} {p.S}", *format_grid(p.cells)]
    return "\n".join(lines) + "\n"


def parse_pda(text: str) -> Pda:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and ln != FORMAT_HEADER and not ln.startswith("#")]
    if not lines or not lines[0].startswith("PDA"):
        raise ValueError("missing 'PDA K F Z S' header")
    head = lines[0].split()
    if len(head) != 5:
        raise ValueError(f"bad header: {lines[0]!r}")
    K, F, Z, S = map(int, head[1:])
    body = [ln.split() for ln in lines[1:]]
    p = Pda.from_grid(body)
    if (p.K, p.F, p.Z, p.S) != (K, F, Z, S):
        raise ValueError(f"header says {(K, F, Z, S)}, grid has {(p.K, p.F, p.Z, p.S)}")
    return p
