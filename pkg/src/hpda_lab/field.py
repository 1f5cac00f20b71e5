"""Arithmetic over prime fields GF(q).

Elements are canonical residues in [0, q). Vectors and matrices are numpy
int64 arrays; every operation reduces eagerly and returns a read-only array so
values can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MAX_Q = 2**31


def is_prime(n: int) -> bool:
    """Deterministic primality test (Miller-Rabin with bases valid below 3.3e24)."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in small:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FieldCtx:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or not (2 <= self.q < _MAX_Q):
            raise ValueError(f"field order must be an integer in [2, 2^31), got {self.q!r}")
        if not is_prime(int(self.q)):
            raise ValueError(f"field order must be prime, got {self.q}")

    # construction

    def vec(self, elems) -> np.ndarray:
        """Build a reduced, read-only field vector (or matrix) from any integer array-like."""
        a = np.asarray(elems, dtype=np.int64)
        return _frozen(np.mod(a, self.q))

    def zeros(self, n: int) -> np.ndarray:
        return _frozen(np.zeros(n, dtype=np.int64))

    # element-wise ops; scalars and arrays both accepted

    def _pair(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if a.ndim and b.ndim and a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
        return a, b

    def _out(self, a):
        a = np.mod(a, self.q)
        return int(a) if a.ndim == 0 else _frozen(a)

    def add(self, a, b):
        a, b = self._pair(a, b)
        return self._out(a + b)

    def sub(self, a, b):
        a, b = self._pair(a, b)
        return self._out(a - b)

    def mul(self, a, b):
        a, b = self._pair(a, b)
        return self._out(a * b)

    def neg(self, a):
        return self._out(-np.asarray(a, dtype=np.int64))

    def inv(self, a):
        a = np.mod(np.asarray(a, dtype=np.int64), self.q)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero in GF(q)")
        if a.ndim == 0:
            return pow(int(a), -1, self.q)
        return _frozen(np.array([pow(int(x), -1, self.q) for x in a.ravel()], dtype=np.int64).reshape(a.shape))

    def dot(self, a, b) -> int:
        a, b = self._pair(a, b)
        return int(np.mod(np.dot(np.mod(a, self.q), np.mod(b, self.q)), self.q))


def matrix_rank(rows, ctx: FieldCtx) -> int:
    """Rank over GF(q) by Gaussian elimination."""
    m = np.array(rows, dtype=np.int64)
    if m.size == 0:
        raise ValueError("matrix_rank of an empty matrix")
    if m.ndim != 2:
        raise ValueError("rows must all have the same length")
    q = ctx.q
    m = np.mod(m, q)
    n_rows, n_cols = m.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.nonzero(m[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        m[rank] = m[rank] * pow(int(m[rank, col]), -1, q) % q
        below = m[rank + 1:, col].copy()
        if np.any(below):
            m[rank + 1:] = (m[rank + 1:] - np.outer(below, m[rank])) % q
        rank += 1
    return rank


def sample_vec_with_sum(ctx: FieldCtx, n: int, target_sum: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from {x in GF(q)^n : sum(x) = target_sum}."""
    if n < 1:
        raise ValueError("length must be at least 1")
    head = rng.integers(0, ctx.q, size=n - 1, dtype=np.int64)
    last = (int(target_sum) - int(head.sum())) % ctx.q
    return ctx.vec(np.append(head, last))
