"""Placement, delivery and decoding for two-layer coded caching driven by an HPDA.

Two modes:
  PLAIN           uncoded placement, signals are sums of demanded combinations
  SECURE_PRIVATE  one-time pads V_s on every signal, privacy masks p per user,
                  only the public vectors q = p + d leave the server

Two delivery variants:
  MIRROR_ASSISTED  mirrors build the mirror-originated signals (labels in S_M)
  MIRROR_BLIND     the server builds those too and mirrors forward them

Users are indexed (k1, k2), 0-based. Packets are 0-based row indices of the HPDA.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .field import FieldCtx, sample_vec_with_sum
from .hpda import Hpda
from .pda import STAR


class Mode(str, enum.Enum):
    PLAIN = "plain"
    SECURE_PRIVATE = "sp"


class Delivery(str, enum.Enum):
    MIRROR_ASSISTED = "assisted"
    MIRROR_BLIND = "blind"


class CacheMiss(RuntimeError):
    """A party tried to use a packet or record it does not hold. Always a bug."""


@dataclass(frozen=True)
class SchemeInstance:
    hpda: Hpda
    n_files: int
    q: int
    file_len: int
    mode: Mode = Mode.PLAIN
    delivery: Delivery = Delivery.MIRROR_ASSISTED

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "delivery", Delivery(self.delivery))
        FieldCtx(self.q)  # validates primality
        if self.n_files < 1:
            raise ValueError("need at least one file")
        if self.file_len < 1 or self.file_len % self.hpda.F:
            raise ValueError(f"file length {self.file_len} is not a positive multiple of F={self.hpda.F}")

    @property
    def ctx(self) -> FieldCtx:
        return FieldCtx(self.q)

    @property
    def packet_len(self) -> int:
        return self.file_len // self.hpda.F

    @property
    def users(self) -> list[tuple[int, int]]:
        return [(k1, k2) for k1 in range(self.hpda.K1) for k2 in range(self.hpda.K2)]

    @property
    def secure(self) -> bool:
        return self.mode is Mode.SECURE_PRIVATE

    def server_labels(self) -> list[int]:
        h = self.hpda
        if self.delivery is Delivery.MIRROR_BLIND:
            return sorted(h.union_labels)
        return sorted(h.union_labels - h.s_m)


@dataclass(frozen=True)
class Library:
    """N files of B symbols. Packet j of file n is symbols [j*B/F, (j+1)*B/F)."""

    files: np.ndarray
    n_packets: int

    def __post_init__(self):
        if self.files.ndim != 2 or self.files.shape[1] % self.n_packets:
            raise ValueError("file length must be a multiple of the packet count")

    @classmethod
    def random(cls, inst: SchemeInstance, rng: np.random.Generator) -> "Library":
        files = rng.integers(0, inst.q, size=(inst.n_files, inst.file_len), dtype=np.int64)
        return cls(files, inst.hpda.F)

    @property
    def packet_len(self) -> int:
        return self.files.shape[1] // self.n_packets

    def packet(self, j: int) -> np.ndarray:
        """All files' packet j, shape (N, B/F)."""
        L = self.packet_len
        return self.files[:, j * L:(j + 1) * L]


def lin_comb(v, lib: Library, j: int, q: int) -> np.ndarray:
    """L_{v,j} = sum_n v_n W_{n,j} over GF(q)."""
    v = np.asarray(v, dtype=np.int64)
    if v.shape != (lib.files.shape[0],):
        raise ValueError(f"coefficient vector has shape {v.shape}, expected ({lib.files.shape[0]},)")
    return v @ lib.packet(j) % q


@dataclass(frozen=True)
class DemandMatrix:
    rows: np.ndarray  # (K1*K2, N), row index k1*K2 + k2
    K2: int

    def row(self, k1: int, k2: int) -> np.ndarray:
        return self.rows[k1 * self.K2 + k2]

    @classmethod
    def unit(cls, K1: int, K2: int, N: int) -> "DemandMatrix":
        """Worst-case default: user (k1, k2) asks for file k1*K2 + k2."""
        if N < K1 * K2:
            raise ValueError(f"need N >= K1*K2 for distinct unit demands, got N={N}")
        return cls(np.eye(K1 * K2, N, dtype=np.int64), K2)

    def as_map(self, K1: int) -> dict[tuple[int, int], np.ndarray]:
        return {(k1, k2): self.row(k1, k2) for k1 in range(K1) for k2 in range(self.K2)}


@dataclass(frozen=True)
class Randomness:
    security: dict  # label -> (B/F,) pad
    privacy: dict   # (k1, k2) -> (N,) mask with entries summing to q-1

    @classmethod
    def sample(cls, inst: SchemeInstance, rng: np.random.Generator) -> "Randomness":
        ctx = inst.ctx
        sec = {s: rng.integers(0, inst.q, size=inst.packet_len, dtype=np.int64) for s in sorted(inst.hpda.union_labels)}
        priv = {u: sample_vec_with_sum(ctx, inst.n_files, inst.q - 1, rng) for u in inst.users}
        return cls(sec, priv)


# caches

@dataclass
class MirrorCache:
    k1: int
    q: int
    packets: dict = field(default_factory=dict)  # j -> (N, B/F)
    keys: dict = field(default_factory=dict)     # s -> V_s

    def lin_comb(self, v, j: int) -> np.ndarray:
        if j not in self.packets:
            raise CacheMiss(f"mirror {self.k1 + 1} does not cache packet row {j + 1}")
        return np.asarray(v, dtype=np.int64) @ self.packets[j] % self.q

    def key(self, s: int) -> np.ndarray:
        if s not in self.keys:
            raise CacheMiss(f"mirror {self.k1 + 1} holds no pad for label {s}")
        return self.keys[s]

    def size(self) -> int:
        return sum(p.size for p in self.packets.values()) + sum(k.size for k in self.keys.values())


@dataclass
class UserCache:
    user: tuple[int, int]
    q: int
    packets: dict = field(default_factory=dict)  # j -> (N, B/F)
    records: dict = field(default_factory=dict)  # label s -> V_s + L_{p,j}

    def lin_comb(self, v, j: int) -> np.ndarray:
        if j not in self.packets:
            raise CacheMiss(f"user {self.user} does not cache packet row {j + 1}")
        return np.asarray(v, dtype=np.int64) @ self.packets[j] % self.q

    def record(self, s: int) -> np.ndarray:
        if s not in self.records:
            raise CacheMiss(f"user {self.user} holds no coded record for label {s}")
        return self.records[s]

    def size(self) -> int:
        return sum(p.size for p in self.packets.values()) + sum(r.size for r in self.records.values())


@dataclass
class CacheSet:
    mirrors: list
    users: dict

    def memory_ratios(self, inst: SchemeInstance) -> tuple[Fraction, Fraction]:
        """(M1/N, M2/N) measured from what is actually stored, worst party per layer."""
        total = inst.n_files * inst.file_len
        m1 = max(c.size() for c in self.mirrors)
        m2 = max(c.size() for c in self.users.values())
        return Fraction(m1, total), Fraction(m2, total)


def place(inst: SchemeInstance, lib: Library, rand: Randomness | None = None) -> CacheSet:
    h = inst.hpda
    if inst.secure and rand is None:
        raise ValueError("secure-private placement needs randomness")
    mirrors = []
    for k1 in range(h.K1):
        c = MirrorCache(k1, inst.q)
        for j in np.nonzero(h.a0[:, k1])[0].tolist():
            c.packets[j] = lib.packet(j).copy()
        if inst.secure:
            for s in sorted(h.s_k[k1] & h.s_m):
                c.keys[s] = rand.security[s].copy()
        mirrors.append(c)
    users = {}
    for k1, k2 in inst.users:
        col = h.sub[k1][:, k2]
        c = UserCache((k1, k2), inst.q)
        for j in range(h.F):
            s = int(col[j])
            if s == STAR:
                c.packets[j] = lib.packet(j).copy()
            elif inst.secure:
                c.records[s] = (rand.security[s] + lin_comb(rand.privacy[(k1, k2)], lib, j, inst.q)) % inst.q
        users[(k1, k2)] = c
    return CacheSet(mirrors, users)


def gen_public_vectors(inst: SchemeInstance, rand: Randomness, D: DemandMatrix) -> dict:
    if not inst.secure:
        raise ValueError("public vectors only exist in secure-private mode")
    return {u: (rand.privacy[u] + D.row(*u)) % inst.q for u in inst.users}


def coefficient_vectors(inst: SchemeInstance, D: DemandMatrix, Q: dict | None) -> dict:
    """The per-user vectors that appear inside transmitted signals: Q if secure, else D."""
    if inst.secure:
        if Q is None:
            raise ValueError("secure-private delivery needs the public vectors")
        return Q
    return D.as_map(inst.hpda.K1)


def server_signals(inst: SchemeInstance, lib: Library, rand: Randomness | None, D: DemandMatrix, Q: dict | None = None) -> dict:
    coefs = coefficient_vectors(inst, D, Q)
    cells = inst.hpda.cells_by_label
    out = {}
    for s in inst.server_labels():
        x = np.zeros(inst.packet_len, dtype=np.int64)
        for k1, j, k2 in cells[s]:
            x += lin_comb(coefs[(k1, k2)], lib, j, inst.q)
        if inst.secure:
            x += rand.security[s]
        out[s] = x % inst.q
    return out


def mirror_signals(inst: SchemeInstance, k1: int, cache: MirrorCache, public: dict, server_sigs: dict) -> dict:
    """Signals mirror k1 sends to its users, built only from its own view.

    ``public`` holds the per-user coefficient vectors the mirror may see (Q in
    secure-private mode, D in plain mode). No library handle is available here.
    """
    h = inst.hpda
    cells = h.cells_by_label
    out = {}
    for s in sorted(h.s_k[k1]):
        if s in h.s_m and inst.delivery is Delivery.MIRROR_BLIND:
            out[s] = server_sigs[s].copy()
        elif s in h.s_m:
            x = cache.key(s).copy() if inst.secure else np.zeros(inst.packet_len, dtype=np.int64)
            for l1, j, l2 in cells[s]:
                x += cache.lin_comb(public[(l1, l2)], j)
            out[s] = x % inst.q
        else:
            x = server_sigs[s].copy()
            for l1, j, l2 in cells[s]:
                if l1 != k1 and h.a0[j, k1]:
                    x -= cache.lin_comb(public[(l1, l2)], j)
            out[s] = x % inst.q
    return out


def _canceled_by_mirror(h: Hpda, k1: int, s: int, cell) -> bool:
    l1, j, _ = cell
    return s not in h.s_m and l1 != k1 and bool(h.a0[j, k1])


def decode_user(inst: SchemeInstance, k1: int, k2: int, cache: UserCache, mirror_sigs: dict, d_row, public: dict) -> np.ndarray:
    """Recover L_{d,j} for every packet row j; returns shape (F, B/F)."""
    h = inst.hpda
    col = h.sub[k1][:, k2]
    cells = h.cells_by_label
    out = np.zeros((h.F, inst.packet_len), dtype=np.int64)
    for j in range(h.F):
        s = int(col[j])
        if s == STAR:
            out[j] = cache.lin_comb(d_row, j)
            continue
        if s not in mirror_sigs:
            raise CacheMiss(f"user {(k1, k2)} is missing signal {s}")
        x = mirror_sigs[s].copy()
        if inst.secure:
            x -= cache.record(s)
        for cell in cells[s]:
            l1, i, l2 = cell
            if (l1, i, l2) == (k1, j, k2) or _canceled_by_mirror(h, k1, s, cell):
                continue
            x -= cache.lin_comb(public[(l1, l2)], i)
        out[j] = x % inst.q
    return out


@dataclass
class Session:
    """Everything produced by one delivery round, kept for transcripts and audits."""

    caches: CacheSet
    public: dict | None
    server: dict
    mirrors: list
    decoded: dict
    expected: dict


def run_delivery(inst: SchemeInstance, lib: Library, rand: Randomness | None, D: DemandMatrix) -> Session:
    h = inst.hpda
    caches = place(inst, lib, rand)
    Q = gen_public_vectors(inst, rand, D) if inst.secure else None
    public = coefficient_vectors(inst, D, Q)
    xs = server_signals(inst, lib, rand, D, Q)
    xm = [mirror_signals(inst, k1, caches.mirrors[k1], public, xs) for k1 in range(h.K1)]
    decoded, expected = {}, {}
    for k1, k2 in inst.users:
        d = D.row(k1, k2)
        decoded[(k1, k2)] = decode_user(inst, k1, k2, caches.users[(k1, k2)], xm[k1], d, public)
        expected[(k1, k2)] = np.stack([lin_comb(d, lib, j, inst.q) for j in range(h.F)])
    return Session(caches, Q, xs, xm, decoded, expected)
