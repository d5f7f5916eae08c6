"""Degree histograms, snapshots, growth traces and their text formats.

All degrees are in-degrees.  Node ids read from files are arbitrary
non-whitespace strings; they are mapped to dense integers in order of
first appearance.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

NODE = 0
EDGE = 1


class PAError(Exception):
    """Base class for errors raised by this package."""


class DataError(PAError, ValueError):
    """Input data is malformed or inconsistent."""


class ParseError(DataError):
    def __init__(self, msg: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)


class NumericError(PAError, ArithmeticError):
    """A numerical procedure cannot produce a result."""


@dataclass(frozen=True)
class DegreeHistogram:
    """Counts ``n_k`` of nodes per in-degree ``k``; absent keys mean zero."""

    counts: dict
    total_nodes: int

    def __post_init__(self):
        for k, n in self.counts.items():
            if k < 0 or n <= 0:
                raise DataError(f"invalid histogram entry {k}: {n}")
        if sum(self.counts.values()) != self.total_nodes:
            raise DataError("histogram counts do not sum to total_nodes")

    @classmethod
    def from_degrees(cls, degrees) -> "DegreeHistogram":
        degrees = np.asarray(degrees, dtype=np.int64)
        if degrees.size == 0:
            return cls({}, 0)
        return cls.from_dense(np.bincount(degrees))

    @classmethod
    def from_dense(cls, nk) -> "DegreeHistogram":
        """Build from an array whose k-th entry is ``n_k``."""
        nk = np.asarray(nk, dtype=np.int64)
        ks = np.flatnonzero(nk)
        return cls({int(k): int(nk[k]) for k in ks}, int(nk.sum()))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted observed degrees and their counts."""
        ks = np.array(sorted(self.counts), dtype=np.int64)
        return ks, np.array([self.counts[k] for k in ks], dtype=np.int64)

    def dense(self) -> np.ndarray:
        nk = np.zeros(self.max_degree + 1, dtype=np.int64)
        for k, n in self.counts.items():
            nk[k] = n
        return nk

    @property
    def max_degree(self) -> int:
        return max(self.counts) if self.counts else -1

    @property
    def total_degree(self) -> int:
        return sum(k * n for k, n in self.counts.items())

    def __len__(self):
        return len(self.counts)


def tail_counts(h: DegreeHistogram) -> dict:
    """Map each observed degree k to the number of nodes with degree > k."""
    ks, nk = h.arrays()
    # suffix sums excluding the current entry
    tails = np.cumsum(nk[::-1])[::-1] - nk
    return {int(k): int(t) for k, t in zip(ks, tails)}


@dataclass(frozen=True)
class Snapshot:
    N: int
    E: int
    histogram: DegreeHistogram
    edges: Optional[np.ndarray] = None
    labels: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.histogram.total_nodes != self.N:
            raise DataError("histogram total does not match N")
        if self.histogram.total_degree != self.E:
            raise DataError("sum of k * n_k does not match E")

    @classmethod
    def from_histogram(cls, h: DegreeHistogram) -> "Snapshot":
        return cls(h.total_nodes, h.total_degree, h)


@dataclass(frozen=True)
class EventSequence:
    """NODE/EDGE tokens with endpoints stripped; ``is_node[t-1]`` is step t."""

    is_node: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "is_node", np.asarray(self.is_node, dtype=bool))

    def __len__(self):
        return len(self.is_node)

    @property
    def node_fraction(self) -> float:
        return float(self.is_node.mean()) if len(self) else float("nan")


@dataclass(frozen=True)
class GrowthTrace:
    """Ordered NODE / EDGE(src, dst) events, one per time-step.

    The network starts with ``n_initial`` isolated nodes (ids ``0..n_initial-1``);
    each NODE event creates the next dense id.  ``src``/``dst`` are -1 for NODE
    events.  ``times`` optionally carries the original timestamps, which allows
    events sharing a timestamp to be collapsed into one step.
    """

    kinds: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    n_initial: int = 2
    times: Optional[np.ndarray] = None
    labels: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        kinds = np.asarray(self.kinds, dtype=np.int8)
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        if not (len(kinds) == len(src) == len(dst)):
            raise DataError("event arrays differ in length")
        if np.any((kinds != NODE) & (kinds != EDGE)):
            raise DataError("unknown event kind")
        # node count at each step, before that step's event
        alive = self.n_initial + np.concatenate(
            ([0], np.cumsum(kinds == NODE)[:-1])).astype(np.int64)
        edge = kinds == EDGE
        if np.any(edge & ((dst < 0) | (dst >= alive))):
            bad = int(np.flatnonzero(edge & ((dst < 0) | (dst >= alive)))[0])
            raise DataError(f"edge target does not exist at step {bad + 1}")
        if np.any(edge & ((src < 0) | (src >= alive))):
            bad = int(np.flatnonzero(edge & ((src < 0) | (src >= alive)))[0])
            raise DataError(f"edge source does not exist at step {bad + 1}")
        if self.times is not None:
            times = np.asarray(self.times, dtype=np.float64)
            if len(times) != len(kinds):
                raise DataError("times length does not match events")
            if np.any(np.diff(times) < 0):
                raise DataError("event times must be nondecreasing")
            object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.kinds)

    @property
    def n_nodes(self) -> int:
        return self.n_initial + int(np.count_nonzero(self.kinds == NODE))

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.kinds == EDGE))

    def in_degrees(self) -> np.ndarray:
        dst = self.dst[self.kinds == EDGE]
        return np.bincount(dst, minlength=self.n_nodes).astype(np.int64)

    def snapshot(self) -> Snapshot:
        """Final network state after applying every event."""
        edge = self.kinds == EDGE
        edges = np.column_stack([self.src[edge], self.dst[edge]])
        h = DegreeHistogram.from_degrees(self.in_degrees())
        return Snapshot(self.n_nodes, self.n_edges, h, edges, self.labels)

    def event_sequence(self) -> EventSequence:
        return EventSequence(self.kinds == NODE)

    def edge_series(self):
        """Per-step new-edge counts ``m(t)`` for t = 1..T-1 (one event per step)."""
        return (self.kinds == EDGE).astype(np.int64)


def event_sequence_from_trace(tr: GrowthTrace) -> EventSequence:
    return tr.event_sequence()


def _lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    elif isinstance(source, str):
        source = io.StringIO(source)
    for line in source:
        if isinstance(line, (bytes, bytearray)):
            line = line.decode("utf-8")
        yield line


def _records(source):
    for lineno, line in enumerate(_lines(source), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        yield lineno, s.split()


def ingest_edge_list(source, timed: bool = False):
    """Read a whitespace-separated edge list.

    ``source`` may be bytes, a string, or any iterable of lines (e.g. an open
    file).  Untimed input yields a :class:`Snapshot`; timed input (third column
    is a timestamp) yields a :class:`GrowthTrace` whose first two distinct ids
    form the initial graph and every later first appearance is a NODE event.
    """
    ids: dict = {}
    labels: list = []

    def node(name):
        i = ids.get(name)
        if i is None:
            i = ids[name] = len(labels)
            labels.append(name)
        return i

    raw = []
    for lineno, fields in _records(source):
        if timed:
            if len(fields) == 2:
                raise ParseError("missing timestamp", lineno)
            if len(fields) != 3:
                raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
            try:
                ts = float(fields[2])
            except ValueError:
                raise ParseError(f"bad timestamp {fields[2]!r}", lineno) from None
            raw.append((fields[0], fields[1], ts))
        else:
            if len(fields) != 2:
                raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
            raw.append((fields[0], fields[1]))

    if not timed:
        edges = np.array([(node(a), node(b)) for a, b in raw],
                         dtype=np.int64).reshape(-1, 2)
        indeg = np.bincount(edges[:, 1], minlength=len(labels))
        h = DegreeHistogram.from_degrees(indeg)
        return Snapshot(len(labels), len(edges), h, edges, labels)

    order = np.argsort(np.array([r[2] for r in raw], dtype=np.float64), kind="stable")
    kinds, src, dst, times = [], [], [], []
    n_initial = 0
    for i in order:
        a, b, ts = raw[i]
        for name in (a, b):
            if name not in ids:
                node(name)
                if n_initial < 2:
                    n_initial += 1
                else:
                    kinds.append(NODE)
                    src.append(-1)
                    dst.append(-1)
                    times.append(ts)
        kinds.append(EDGE)
        src.append(ids[a])
        dst.append(ids[b])
        times.append(ts)
    return GrowthTrace(np.array(kinds, dtype=np.int8), np.array(src, dtype=np.int64),
                       np.array(dst, dtype=np.int64), n_initial=n_initial,
                       times=np.array(times, dtype=np.float64), labels=labels)


def read_edge_list(path, timed: bool = False):
    with open(path, "rb") as fh:
        return ingest_edge_list(fh, timed=timed)


# --- trace / sequence / histogram text formats ---------------------------------

def write_trace(tr: GrowthTrace, fh, header: Optional[dict] = None):
    """One token per line: ``N`` or ``E <src> <dst>``."""
    if header:
        for key in sorted(header):
            fh.write(f"# {key}={header[key]}\n")
    fh.write(f"# initial_nodes={tr.n_initial}\n")
    lines = np.where(tr.kinds == NODE, "N",
                     np.char.add(np.char.add("E ", tr.src.astype(str)),
                                 np.char.add(" ", tr.dst.astype(str))))
    if len(lines):
        fh.write("\n".join(lines.tolist()))
        fh.write("\n")


def read_trace(source) -> GrowthTrace:
    n_initial = 2
    kinds, src, dst = [], [], []
    for lineno, line in enumerate(_lines(source), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.startswith("initial_nodes="):
                n_initial = int(body.split("=", 1)[1])
            continue
        fields = s.split()
        if fields[0] == "N" and len(fields) == 1:
            kinds.append(NODE)
            src.append(-1)
            dst.append(-1)
        elif fields[0] == "E" and len(fields) == 3:
            try:
                a, b = int(fields[1]), int(fields[2])
            except ValueError:
                raise ParseError("edge endpoints must be integers", lineno) from None
            kinds.append(EDGE)
            src.append(a)
            dst.append(b)
        else:
            raise ParseError(f"unrecognised trace token {s!r}", lineno)
    return GrowthTrace(np.array(kinds, dtype=np.int8), np.array(src, dtype=np.int64),
                       np.array(dst, dtype=np.int64), n_initial=n_initial)


def write_sequence(seq: EventSequence, fh):
    if len(seq):
        fh.write("\n".join(np.where(seq.is_node, "N", "E").tolist()))
        fh.write("\n")


def read_sequence(source) -> EventSequence:
    """Read ``N``/``E`` tokens; endpoints after ``E`` are accepted and ignored."""
    tokens = []
    for lineno, fields in _records(source):
        if fields[0] == "N" and len(fields) == 1:
            tokens.append(True)
        elif fields[0] == "E" and len(fields) in (1, 3):
            tokens.append(False)
        else:
            raise ParseError(f"unrecognised sequence token {' '.join(fields)!r}", lineno)
    return EventSequence(np.array(tokens, dtype=bool))


def write_histogram(h: DegreeHistogram, fh, header: Optional[dict] = None):
    if header:
        for key in sorted(header):
            fh.write(f"# {key}={header[key]}\n")
    fh.write("k,n_k\n")
    ks, nk = h.arrays()
    for k, n in zip(ks, nk):
        fh.write(f"{k},{n}\n")


def read_histogram(source) -> DegreeHistogram:
    counts = {}
    for lineno, line in enumerate(_lines(source), start=1):
        s = line.strip()
        if not s or s.startswith("#") or s.replace(" ", "") == "k,n_k":
            continue
        parts = s.replace(",", " ").split()
        if len(parts) != 2:
            raise ParseError("expected 'k,n_k'", lineno)
        try:
            k, n = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer histogram row {s!r}", lineno) from None
        if k < 0 or n < 0:
            raise ParseError("negative degree or count", lineno)
        if n:
            counts[k] = counts.get(k, 0) + n
    return DegreeHistogram(counts, sum(counts.values()))
