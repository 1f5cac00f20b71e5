"""Sessions with transcripts, load measurement, random demands and exact leakage audits."""

from __future__ import annotations

import enum
import hashlib
import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analysis import PerfRecord, hpda_perf
from .field import FieldCtx, matrix_rank
from .hpda import Hpda
from .scheme import (
    Delivery,
    DemandMatrix,
    Library,
    Mode,
    Randomness,
    SchemeInstance,
    run_delivery,
)

DEFAULT_BUDGET = 2**26


@dataclass(frozen=True)
class Emission:
    id: str
    length: int
    kind: str = "payload"


@dataclass
class Transcript:
    packet_len: int
    layer1: list = field(default_factory=list)
    layer2: list = field(default_factory=list)  # one list per mirror
    decoded: dict = field(default_factory=dict)  # user -> (ok, sha256 hex of decoded symbols)
    memory: tuple = (Fraction(0), Fraction(0))

    @property
    def all_decoded(self) -> bool:
        return all(ok for ok, _ in self.decoded.values())

    def digest(self) -> str:
        return hashlib.sha256(self.to_log().encode()).hexdigest()

    def to_log(self) -> str:
        lines = [f"LAYER 1 SIGNAL {e.id} LEN {e.length} KIND {e.kind}" for e in self.layer1]
        for k1, em in enumerate(self.layer2):
            lines += [f"LAYER 2 SIGNAL m{k1 + 1}/{e.id} LEN {e.length} KIND {e.kind}" for e in em]
        for (k1, k2), (ok, dg) in sorted(self.decoded.items()):
            lines.append(f"DECODE U{k1 + 1},{k2 + 1} {'OK' if ok else 'FAIL'} {dg}")
        return "\n".join(lines) + "\n"


def _demand_meta(inst: SchemeInstance) -> list[Emission]:
    tag = "q" if inst.secure else "d"
    return [Emission(f"{tag}{k1 + 1},{k2 + 1}", inst.n_files, "metadata") for k1, k2 in inst.users]


def run_session(inst: SchemeInstance, lib: Library, rand: Randomness | None, D: DemandMatrix) -> Transcript:
    """Run placement and delivery end to end and record every emission in order.

    Public vectors (or plain demands) travel as metadata and never count toward loads.
    """
    sess = run_delivery(inst, lib, rand, D)
    L = inst.packet_len
    t = Transcript(packet_len=L, memory=sess.caches.memory_ratios(inst))
    t.layer1 += _demand_meta(inst)
    t.layer1 += [Emission(f"s{s}", L) for s in sorted(sess.server)]
    for sigs in sess.mirrors:
        t.layer2.append(_demand_meta(inst) + [Emission(f"s{s}", L) for s in sorted(sigs)])
    for u in inst.users:
        got = sess.decoded[u]
        ok = bool(np.array_equal(got, sess.expected[u]))
        t.decoded[u] = (ok, hashlib.sha256(np.ascontiguousarray(got).tobytes()).hexdigest()[:16])
    return t


def measure_loads(t: Transcript, F: int) -> tuple[Fraction, Fraction]:
    def packets(em):
        n = sum(e.length for e in em if e.kind == "payload")
        if n % t.packet_len:
            raise ValueError("payload length is not a whole number of packets")
        return n // t.packet_len

    r1 = Fraction(packets(t.layer1), F)
    r2 = max((Fraction(packets(em), F) for em in t.layer2), default=Fraction(0))
    return r1, r2


def random_full_rank_demand(K1: int, K2: int, N: int, q: int, rng: np.random.Generator,
                            max_tries: int = 10_000) -> DemandMatrix:
    if N < K1 * K2:
        raise ValueError(f"full rank needs N >= K1*K2, got N={N}, K1*K2={K1 * K2}")
    ctx = FieldCtx(q)
    for _ in range(max_tries):
        rows = rng.integers(0, q, size=(K1 * K2, N), dtype=np.int64)
        if matrix_rank(rows, ctx) == K1 * K2:
            return DemandMatrix(rows, K2)
    raise RuntimeError("could not sample a full-rank demand matrix")


# formulas against measurement

@dataclass(frozen=True)
class FormulaCheck:
    predicted: PerfRecord
    measured: tuple  # (m1, m2, R1, R2, F)
    decoded: bool

    @property
    def ok(self) -> bool:
        p = self.predicted
        return self.decoded and self.measured == (p.m1_ratio, p.m2_ratio, p.R1, p.R2, p.F)


def formula_vs_sim(h: Hpda, N: int, q: int, mode="plain", delivery="assisted", seed: int = 0,
                   predicted: PerfRecord | None = None, packet_len: int = 1, demand: DemandMatrix | None = None) -> FormulaCheck:
    """Run one session and compare measured memory, loads and F with closed forms.

    Without an explicit ``predicted`` record the general set-cardinality formulas are used.
    """
    rng = np.random.default_rng(seed)
    inst = SchemeInstance(h, N, q, h.F * packet_len, Mode(mode), Delivery(delivery))
    lib = Library.random(inst, rng)
    rand = Randomness.sample(inst, rng) if inst.secure else None
    D = demand if demand is not None else random_full_rank_demand(h.K1, h.K2, N, q, rng)
    t = run_session(inst, lib, rand, D)
    r1, r2 = measure_loads(t, h.F)
    if predicted is None:
        predicted = hpda_perf(h, N, inst.mode.value, blind=inst.delivery is Delivery.MIRROR_BLIND)
    return FormulaCheck(predicted, (t.memory[0], t.memory[1], r1, r2, h.F), t.all_decoded)


# exact audits

class AuditTarget(str, enum.Enum):
    SECURITY_I = "security1"
    SECURITY_II = "security2"
    PRIVACY_I = "privacy1"
    PRIVACY_II = "privacy2"


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class AuditSpec:
    """One exhaustive audit. Mirror and user indices in t1, t2 are 0-based.

    demand_model "single-file" enumerates every assignment of one file per
    user; "fixed" uses ``demand``. With joint_mirrors False the Security II
    wiretapper taps one mirror link at a time and the worst link is reported.
    """

    hpda: Hpda
    q: int
    n_files: int
    target: AuditTarget
    mode: Mode = Mode.SECURE_PRIVATE
    delivery: Delivery = Delivery.MIRROR_ASSISTED
    t1: frozenset = frozenset()
    t2: frozenset = frozenset()
    demand_model: str = "single-file"
    demand: DemandMatrix | None = None
    joint_mirrors: bool = True
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        for name, enum_t in (("target", AuditTarget), ("mode", Mode), ("delivery", Delivery)):
            object.__setattr__(self, name, enum_t(getattr(self, name)))
        object.__setattr__(self, "t1", frozenset(self.t1))
        object.__setattr__(self, "t2", frozenset(self.t2))
        if self.demand_model not in ("single-file", "fixed"):
            raise ValueError("demand_model must be 'single-file' or 'fixed'")
        if self.demand_model == "fixed" and self.demand is None:
            raise ValueError("fixed demand model needs a demand matrix")

    @property
    def secure(self) -> bool:
        return self.mode is Mode.SECURE_PRIVATE

    @property
    def users(self):
        return [(k1, k2) for k1 in range(self.hpda.K1) for k2 in range(self.hpda.K2)]

    def n_pads(self) -> int:
        return len(self.hpda.union_labels) if self.secure else 0

    def lanes(self) -> int:
        return self.q ** (self.n_files * self.hpda.F + self.n_pads())

    def outer_size(self) -> int:
        n_users = len(self.users)
        p = self.q ** ((self.n_files - 1) * n_users) if self.secure else 1
        d = self.n_files ** n_users if self.demand_model == "single-file" else 1
        return p * d

    def states(self) -> int:
        return self.lanes() * self.outer_size()


@dataclass(frozen=True)
class AuditResult:
    target: AuditTarget
    is_zero: bool
    mi: float  # log-q units
    states: int
    secret_support: int
    observation_support: int
    per_link: tuple = ()

    def mi_text(self) -> str:
        return "0/1" if self.is_zero else f"{self.mi:.12g}"

    def report(self) -> str:
        lines = [
            f"target: {self.target.value}",
            f"mi_zero: {'yes' if self.is_zero else 'no'}",
            f"mi_log_q: {self.mi_text()}",
            f"states: {self.states}/1",
            f"secret_support: {self.secret_support}/1",
            f"observation_support: {self.observation_support}/1",
        ]
        for k1, v in self.per_link:
            lines.append(f"mi_link_{k1 + 1}: {v}")
        return "\n".join(lines) + "\n"


def _outer_iter(spec: AuditSpec):
    ctx_q, N = spec.q, spec.n_files
    users = spec.users
    if spec.secure:
        masks = [np.array(h + ((spec.q - 1 - sum(h)) % ctx_q,), dtype=np.int64)
                 for h in itertools.product(range(ctx_q), repeat=N - 1)]
    else:
        masks = [None]
    if spec.demand_model == "single-file":
        demands = [np.eye(N, dtype=np.int64)[i] for i in range(N)]
    else:
        demands = None
    p_iter = itertools.product(masks, repeat=len(users)) if spec.secure else [tuple(None for _ in users)]
    for ps in p_iter:
        if demands is None:
            yield ps, spec.demand.rows
        else:
            for ds in itertools.product(range(N), repeat=len(users)):
                yield ps, np.stack([demands[i] for i in ds])


def _lane_library(spec: AuditSpec):
    """Library and pads whose symbol lanes enumerate every (W, V) combination."""
    h, q, N = spec.hpda, spec.q, spec.n_files
    L = spec.lanes()
    idx = np.arange(L, dtype=np.int64)
    digits = [(idx // q**k) % q for k in range(N * h.F + spec.n_pads())]
    files = np.zeros((N, h.F * L), dtype=np.int64)
    for n in range(N):
        for j in range(h.F):
            files[n, j * L:(j + 1) * L] = digits[n * h.F + j]
    pads = {s: digits[N * h.F + i] for i, s in enumerate(sorted(h.union_labels))} if spec.secure else {}
    return Library(files, h.F), pads, L


def _columns(spec: AuditSpec, sess, lib: Library, D: np.ndarray, L: int, link: int | None):
    """Secret and observation columns (each broadcastable to L lanes) for the audit target."""
    h = spec.hpda
    K2 = h.K2
    const = lambda a: [np.full(L, int(x), dtype=np.int64) for x in np.ravel(a)]
    w_cols = list(lib.files.reshape(spec.n_files, h.F, L).reshape(-1, L))
    q_cols = [c for u in spec.users for c in const(sess.public[u])] if spec.secure else []
    row = lambda u: u[0] * K2 + u[1]
    tgt = spec.target
    if tgt is AuditTarget.SECURITY_I:
        sec = const(D) + w_cols
        obs = q_cols + [sess.server[s] for s in sorted(sess.server)]
    elif tgt is AuditTarget.SECURITY_II:
        sec = const(D) + w_cols
        mirrors = range(h.K1) if link is None else [link]
        obs = q_cols + [m[s] for k1 in mirrors for m in [sess.mirrors[k1]] for s in sorted(m)]
    elif tgt is AuditTarget.PRIVACY_I:
        hidden = [u for u in spec.users if u[0] not in spec.t1]
        seen = [u for u in spec.users if u[0] in spec.t1]
        sec = const(np.stack([D[row(u)] for u in hidden])) if hidden else []
        obs = q_cols + [sess.server[s] for s in sorted(sess.server)] + w_cols
        obs += [c for u in seen for c in const(D[row(u)])]
        for k1 in sorted(spec.t1):
            mc = sess.caches.mirrors[k1]
            obs += [mc.keys[s] for s in sorted(mc.keys)]
            obs += [c for j in sorted(mc.packets) for c in mc.packets[j]]
    else:
        group = {(k1, k2) for k1 in spec.t1 for k2 in spec.t2}
        hidden = [u for u in spec.users if u not in group]
        seen = sorted(group)
        sec = const(np.stack([D[row(u)] for u in hidden])) if hidden else []
        obs = q_cols + w_cols + [c for u in seen for c in const(D[row(u)])]
        for k1 in sorted(spec.t1):
            m = sess.mirrors[k1]
            obs += [m[s] for s in sorted(m)]
        for u in seen:
            uc = sess.caches.users[u]
            obs += [uc.records[s] for s in sorted(uc.records)]
            obs += [c for j in sorted(uc.packets) for c in uc.packets[j]]
    return sec, obs


def _rows(cols, L):
    if not cols:
        return [b""] * L
    m = np.stack([np.broadcast_to(c, (L,)) for c in cols], axis=1).astype(np.uint32)
    m = np.ascontiguousarray(m)
    return [r.tobytes() for r in m]


def _count_chunk(spec: AuditSpec, start: int, stop: int, links: tuple):
    lib, pads, L = _lane_library(spec)
    inst = SchemeInstance(spec.hpda, spec.n_files, spec.q, lib.files.shape[1], spec.mode, spec.delivery)
    counters = {link: Counter() for link in links}
    for ps, D in itertools.islice(_outer_iter(spec), start, stop):
        rand = Randomness(pads, dict(zip(spec.users, ps))) if spec.secure else None
        sess = run_delivery(inst, lib, rand, DemandMatrix(D, spec.hpda.K2))
        for link in links:
            sec, obs = _columns(spec, sess, lib, D, L, link)
            counters[link].update(zip(_rows(sec, L), _rows(obs, L)))
    return counters


def _mi(joint: Counter, q: int):
    total = sum(joint.values())
    cx, cy = Counter(), Counter()
    for (x, y), c in joint.items():
        cx[x] += c
        cy[y] += c
    zero = all(c * total == cx[x] * cy[y] for (x, y), c in joint.items())
    if zero:
        return True, 0.0, len(cx), len(cy)
    mi = sum(c / total * math.log(c * total / (cx[x] * cy[y])) for (x, y), c in joint.items())
    return False, mi / math.log(q), len(cx), len(cy)


def mi_audit(spec: AuditSpec, workers: int = 1) -> AuditResult:
    """Exact mutual information between the target's secret and observation.

    Files, pads, privacy masks and (optionally) demands are enumerated
    exhaustively; every combination is equally likely. Zero is decided by exact
    integer comparison of joint and product counts; a nonzero value is
    reported in log-q units as a float since it is generally irrational.
    """
    states = spec.states()
    if states > spec.budget:
        raise BudgetExceeded(f"audit needs {states} states, budget is {spec.budget}")
    if spec.target is AuditTarget.SECURITY_II and not spec.joint_mirrors:
        links = tuple(range(spec.hpda.K1))
    else:
        links = (None,)
    outer = spec.outer_size()
    if workers <= 1:
        counters = _count_chunk(spec, 0, outer, links)
    else:
        bounds = np.linspace(0, outer, workers + 1).astype(int)
        counters = {link: Counter() for link in links}
        with ProcessPoolExecutor(workers) as ex:
            futs = [ex.submit(_count_chunk, spec, int(a), int(b), links) for a, b in zip(bounds, bounds[1:]) if b > a]
            for f in futs:
                for link, c in f.result().items():
                    counters[link].update(c)
    results = {link: _mi(c, spec.q) for link, c in counters.items()}
    if links == (None,):
        zero, mi, nx, ny = results[None]
        return AuditResult(spec.target, zero, mi, states, nx, ny)
    per = tuple((k1, "0/1" if results[k1][0] else f"{results[k1][1]:.12g}") for k1 in links)
    worst = max(links, key=lambda k: results[k][1])
    zero, mi, nx, ny = results[worst]
    return AuditResult(spec.target, all(r[0] for r in results.values()), mi, states, nx, ny, per)
