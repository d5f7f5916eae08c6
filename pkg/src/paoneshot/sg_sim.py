"""Simple Growth (SG) network simulator.

The network starts with two isolated nodes.  At each of the ``T - 1`` steps
either a new isolated node is added (probability ``p(t)``, or as dictated by a
replayed node/edge sequence) or one new edge is added whose destination is a
node of in-degree ``k`` drawn with probability ``A_k / H`` and whose source is
uniform over existing nodes.

Destination sampling is two-stage: a degree class is drawn from a Fenwick tree
over the class weights ``W_k = A_k * n_k``, then a node uniformly within the
class.  The within-class index is taken from the search remainder, so a single
uniform drives both stages and the degree histogram depends only on the growth
stream; source nodes use a separate stream.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from numba import njit

from .fenwick import capacity_for, fw_add, fw_build, fw_search
from .net_core import (DataError, DegreeHistogram, EventSequence, GrowthTrace,
                       Snapshot)

REBUILD_EVERY = 1 << 20
HAT_P_EPS = 1e-6


# --- attachment functions ------------------------------------------------------

class AttachmentFunction:
    """Maps in-degree k to a positive attachment value ``A_k``."""

    def values(self, n: int) -> np.ndarray:
        """``A_0 .. A_{n-1}`` as a float array."""
        raise NotImplementedError

    def __call__(self, k):
        k = np.asarray(k, dtype=np.int64)
        return self.values(int(k.max()) + 1)[k] if k.size else np.empty(0)


@dataclass(frozen=True)
class PowerLaw(AttachmentFunction):
    """``A_k = max(k, 1) ** alpha``."""
    alpha: float

    def values(self, n):
        return np.maximum(np.arange(n, dtype=np.float64), 1.0) ** self.alpha


@dataclass(frozen=True)
class LogDamped(AttachmentFunction):
    """``A_k = max(k, 1) / (1 + beta * log(max(k, 1)))``."""
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    def values(self, n):
        k = np.maximum(np.arange(n, dtype=np.float64), 1.0)
        return k / (1.0 + self.beta * np.log(k))


@dataclass(frozen=True)
class Linear(AttachmentFunction):
    """``A_k = k + c`` with ``c > 0``."""
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")

    def values(self, n):
        return np.arange(n, dtype=np.float64) + self.c


@dataclass(frozen=True, eq=False)
class Tabulated(AttachmentFunction):
    """Explicit values per degree; degrees past the table hold the last value."""
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("table must be a nonempty 1-d array")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("attachment values must be finite and positive")
        object.__setattr__(self, "table", t)

    def values(self, n):
        t = self.table
        if n <= t.size:
            return t[:n].copy()
        return np.concatenate([t, np.full(n - t.size, t[-1])])


# --- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie strictly inside (0, 1), got {self.p}")


@dataclass(frozen=True)
class Sequence:
    events: EventSequence


Schedule = Union[Constant, Sequence]


@dataclass(frozen=True)
class SGConfig:
    T: int
    schedule: Schedule
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if isinstance(self.schedule, Sequence):
            if len(self.schedule.events) < self.T - 1:
                raise DataError(
                    f"sequence has {len(self.schedule.events)} tokens, "
                    f"need T - 1 = {self.T - 1}")
        elif not isinstance(self.schedule, Constant):
            raise TypeError("schedule must be Constant or Sequence")


def hat_p(N: int, E: int) -> float:
    """Node-arrival probability matching an observed snapshot, ``(N-2)/(E+N-2)``."""
    if N < 2:
        raise DataError("need at least 2 nodes")
    if E < 0:
        raise DataError("negative edge count")
    denom = E + N - 2
    p = (N - 2) / denom if denom > 0 else 0.0
    return min(max(p, HAT_P_EPS), 1.0 - HAT_P_EPS)


# --- RNG plumbing --------------------------------------------------------------

def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Seed for task ``key`` under ``seed``; independent of execution order."""
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def generators(ss: np.random.SeedSequence):
    """Growth and source-node generators for one simulation."""
    growth, source = ss.spawn(2)
    return (np.random.Generator(np.random.PCG64(growth)),
            np.random.Generator(np.random.PCG64(source)))


def default_threads() -> int:
    env = os.environ.get("PAONESHOT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_parallel(fn, n_tasks: int, threads: Optional[int] = None) -> list:
    """``[fn(i) for i in range(n_tasks)]`` on a thread pool; results stay indexed."""
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or n_tasks <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=min(threads, n_tasks)) as pool:
        return list(pool.map(fn, range(n_tasks)))


# --- compiled core -------------------------------------------------------------

@njit(nogil=True, cache=True)
def _sample_class(tree, nk, A, rng):
    """Draw a degree class and a uniform index within it."""
    size = tree.shape[0] - 1
    while True:
        u = rng.random() * tree[size]
        k, r = fw_search(tree, u)
        if k < size and nk[k] > 0:
            j = int(r / A[k])
            if j >= nk[k]:
                j = nk[k] - 1
            elif j < 0:
                j = 0
            return k, j


@njit(nogil=True, cache=True)
def _sample_many(tree, nk, A, perm, start, rng, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        k, j = _sample_class(tree, nk, A, rng)
        out[i] = perm[start[k] + j]
    return out


@njit(nogil=True, cache=True)
def _promote(tree, nk, A, k):
    nk[k] -= 1
    nk[k + 1] += 1
    fw_add(tree, k, -A[k])
    fw_add(tree, k + 1, A[k + 1])


@njit(nogil=True, cache=True)
def _promote_node(perm, pos, start, deg, v):
    # buckets sit in descending degree order; bucket k+1 directly precedes k
    k = deg[v]
    first = start[k]
    w = perm[first]
    perm[first] = v
    perm[pos[v]] = w
    pos[w] = pos[v]
    pos[v] = first
    start[k] += 1
    deg[v] = k + 1


@njit(nogil=True, cache=True)
def _rebuild(tree, nk, A):
    size = tree.shape[0] - 1
    fw_build(tree, A[:size] * nk[:size])


@njit(nogil=True, cache=True)
def _run(tree, nk, A, perm, pos, start, deg, state, n_steps, p, tokens,
         use_tokens, rng, src_rng, track_nodes, record, kinds, src, dst, offset):
    """Advance the SG process ``n_steps`` steps.

    ``state`` is ``[n_nodes, updates_since_rebuild]``.  Events are written to
    ``kinds/src/dst[offset + t]`` when ``record`` is set.
    """
    n = state[0]
    updates = state[1]
    for t in range(n_steps):
        if use_tokens:
            is_node = tokens[t]
        else:
            is_node = rng.random() < p
        if is_node:
            nk[0] += 1
            fw_add(tree, 0, A[0])
            updates += 1
            if track_nodes:
                perm[n] = n
                pos[n] = n
                deg[n] = 0
            if record:
                kinds[offset + t] = 0
                src[offset + t] = -1
                dst[offset + t] = -1
            n += 1
        else:
            k, j = _sample_class(tree, nk, A, rng)
            if track_nodes:
                v = perm[start[k] + j]
                _promote_node(perm, pos, start, deg, v)
                if record:
                    kinds[offset + t] = 1
                    src[offset + t] = int(src_rng.random() * n)
                    dst[offset + t] = v
            _promote(tree, nk, A, k)
            updates += 2
        if updates >= REBUILD_EVERY:
            _rebuild(tree, nk, A)
            updates = 0
    state[0] = n
    state[1] = updates


class SimState:
    """Mutable SG state: per-node degrees, degree buckets, class weight tree.

    ``capacity`` bounds the largest degree reachable; ``max_nodes`` bounds the
    node count.  Node-level bookkeeping is kept only when ``track_nodes``.
    """

    def __init__(self, A: AttachmentFunction, capacity: int, max_nodes: int = 0,
                 track_nodes: bool = True):
        self.size = capacity_for(capacity + 1)
        self.A = np.ascontiguousarray(A.values(self.size + 1), dtype=np.float64)
        if not np.all(np.isfinite(self.A)) or np.any(self.A <= 0):
            raise ValueError("attachment values must be finite and positive")
        self.tree = np.zeros(self.size + 1)
        self.nk = np.zeros(self.size + 1, dtype=np.int64)
        self.track_nodes = track_nodes
        m = max_nodes if track_nodes else 0
        self.perm = np.zeros(m, dtype=np.int64)
        self.pos = np.zeros(m, dtype=np.int64)
        self.deg = np.zeros(m, dtype=np.int64)
        self.start = np.zeros(self.size + 1, dtype=np.int64)
        self.state = np.zeros(2, dtype=np.int64)

    @classmethod
    def from_degrees(cls, degrees, A: AttachmentFunction, extra_nodes: int = 0,
                     extra_degree: int = 0) -> "SimState":
        """State holding nodes ``0..len(degrees)-1`` with the given in-degrees."""
        degrees = np.asarray(degrees, dtype=np.int64)
        n = len(degrees)
        kmax = int(degrees.max()) if n else 0
        st = cls(A, kmax + extra_degree + 1, n + extra_nodes, track_nodes=True)
        order = np.argsort(-degrees, kind="stable")
        st.perm[:n] = order
        st.pos[order] = np.arange(n)
        st.deg[:n] = degrees
        counts = np.bincount(degrees, minlength=st.size + 1)
        st.nk[:] = counts[:st.size + 1]
        # bucket k starts after all higher-degree buckets
        higher = np.cumsum(counts[::-1])[::-1] - counts
        st.start[:] = higher[:st.size + 1]
        st.state[0] = n
        _rebuild(st.tree, st.nk, st.A)
        return st

    @property
    def n_nodes(self) -> int:
        return int(self.state[0])

    @property
    def H(self) -> float:
        return float(self.tree[self.size])

    def exact_H(self) -> float:
        return float(np.dot(self.A[:self.size], self.nk[:self.size]))

    def degrees(self) -> np.ndarray:
        return self.deg[:self.n_nodes].copy()

    def sample_destination(self, rng: np.random.Generator) -> int:
        return sample_destination(self, rng)

    def sample_destinations(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` independent destination draws from the current (frozen) state."""
        return _sample_many(self.tree, self.nk, self.A, self.perm, self.start, rng, n)

    def run(self, n_steps: int, rng, schedule: Schedule, src_rng=None,
            record=False, out=None, offset=0):
        if isinstance(schedule, Sequence):
            tokens = np.ascontiguousarray(schedule.events.is_node[:n_steps])
            use_tokens, p = True, 0.5
        else:
            tokens = np.zeros(1, dtype=np.bool_)
            use_tokens, p = False, schedule.p
        if record:
            kinds, src, dst = out
        else:
            kinds = np.zeros(1, dtype=np.int8)
            src = dst = np.zeros(1, dtype=np.int64)
        if src_rng is None:
            src_rng = rng
        _run(self.tree, self.nk, self.A, self.perm, self.pos, self.start, self.deg,
             self.state, n_steps, p, tokens, use_tokens, rng, src_rng,
             self.track_nodes, record, kinds, src, dst, offset)


def sample_destination(state: SimState, rng: np.random.Generator) -> int:
    """Node drawn with probability ``A_deg(v) / H``."""
    k, j = _sample_class(state.tree, state.nk, state.A, rng)
    return int(state.perm[state.start[k] + j])


# --- public entry points -------------------------------------------------------

@dataclass
class SimResult:
    snapshot: Snapshot
    nk: np.ndarray = field(repr=False)
    trace: Optional[GrowthTrace] = None


def _initial_state(T: int, A: AttachmentFunction, track_nodes: bool) -> SimState:
    # degrees never exceed the number of edge steps, T - 1
    st = SimState(A, max(T, 2), T + 1 if track_nodes else 0, track_nodes)
    st.nk[0] = 2
    st.state[0] = 2
    if track_nodes:
        st.perm[:2] = [0, 1]
        st.pos[:2] = [0, 1]
    _rebuild(st.tree, st.nk, st.A)
    return st


def simulate_counts(T: int, schedule: Schedule, A: AttachmentFunction,
                    ss: np.random.SeedSequence) -> np.ndarray:
    """Final dense degree counts ``n_k(T)`` of one SG run (fast path)."""
    rng, _ = generators(ss)
    st = _initial_state(T, A, track_nodes=False)
    st.run(T - 1, rng, schedule)
    kmax = int(np.flatnonzero(st.nk)[-1])
    return st.nk[:kmax + 1].copy()


def simulate(cfg: SGConfig, A: AttachmentFunction) -> SimResult:
    """Run one SG network of ``cfg.T`` time-steps."""
    ss = np.random.SeedSequence(cfg.seed)
    rng, src_rng = generators(ss)
    record = cfg.record_trace
    st = _initial_state(cfg.T, A, track_nodes=record)
    n_steps = cfg.T - 1
    out = None
    if record:
        out = (np.zeros(n_steps, dtype=np.int8), np.zeros(n_steps, dtype=np.int64),
               np.zeros(n_steps, dtype=np.int64))
    st.run(n_steps, rng, cfg.schedule, src_rng, record, out)
    kmax = int(np.flatnonzero(st.nk)[-1])
    nk = st.nk[:kmax + 1].copy()
    h = DegreeHistogram.from_dense(nk)
    if not record:
        snap = Snapshot(h.total_nodes, h.total_degree, h)
        return SimResult(snap, nk)
    tr = GrowthTrace(*out, n_initial=2)
    snap = tr.snapshot()
    return SimResult(snap, nk, tr)


def simulate_replicates(cfg: SGConfig, A: AttachmentFunction, n: int,
                        threads: Optional[int] = None) -> list:
    """``n`` runs whose seeds are derived from ``cfg.seed`` and the replicate index."""
    def one(i):
        c = SGConfig(cfg.T, cfg.schedule, replicate_seed(cfg.seed, i), cfg.record_trace)
        return simulate(c, A)
    return run_parallel(one, n, threads)


def replicate_seed(base_seed: int, index: int) -> int:
    """63-bit seed for replicate ``index``."""
    word = seed_sequence(base_seed, index).generate_state(1, np.uint64)[0]
    return int(word >> np.uint64(1))
