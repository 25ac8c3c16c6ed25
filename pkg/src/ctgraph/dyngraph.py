"""Continuous-time dynamic graphs: an initial topology plus time-ordered edge-addition events."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ADD = "Add"
DELETE = "Delete"

SECONDS_PER_DAY = 86400.0
SECONDS_PER_HOUR = 3600.0
CONGESTION_Z = 1.645  # one-sided 95%

FEATURE_MAGIC = b"CTGFEAT\x00"


class GraphDataError(ValueError):
    """Malformed or inconsistent graph input."""


class UnsupportedOperationError(GraphDataError):
    """Raised for edge operations other than addition."""


@dataclass(frozen=True)
class Event:
    u: int
    v: int
    op: str
    t: float


@dataclass(frozen=True)
class EventLog:
    """Columnar, time-sorted edge-addition events."""

    u: np.ndarray
    v: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.int64)
        v = np.ascontiguousarray(self.v, dtype=np.int64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        if not (u.shape == v.shape == t.shape) or u.ndim != 1:
            raise GraphDataError("event columns must be 1-D and of equal length")
        if len(t) and np.any(np.diff(t) < 0):
            raise GraphDataError("events must be sorted by timestamp")
        if np.any(u == v):
            raise GraphDataError("self-loop events are not allowed")
        for name, arr in (("u", u), ("v", v), ("t", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls) -> "EventLog":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventLog":
        events = list(events)
        for e in events:
            if e.op != ADD:
                raise UnsupportedOperationError(f"unsupported edge operation {e.op!r}")
        order = np.argsort([e.t for e in events], kind="stable")
        events = [events[i] for i in order]
        return cls(
            np.array([e.u for e in events], np.int64),
            np.array([e.v for e in events], np.int64),
            np.array([e.t for e in events], np.float64),
        )

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for u, v, t in zip(self.u.tolist(), self.v.tolist(), self.t.tolist()):
            yield Event(u, v, ADD, t)


@dataclass(frozen=True)
class History:
    """Neighbors of ``owner`` visible strictly before a query time.

    One entry per neighbor carrying its latest event time; entries are ordered by
    neighbor id so downstream reductions are order-independent.
    """

    owner: int
    neighbors: np.ndarray
    times: np.ndarray
    clusters: np.ndarray
    t_bar: float

    @property
    def entries(self) -> list[tuple[int, float, int]]:
        return list(zip(self.neighbors.tolist(), self.times.tolist(), self.clusters.tolist()))

    def __len__(self) -> int:
        return len(self.neighbors)


@dataclass(frozen=True)
class DynamicGraph:
    """The pair (initial graph at ``t0``, event log), with node features.

    ``initial_edges`` is an (E, 2) array of undirected edges present at ``t0``.
    Edges are treated as undirected for neighborhoods: an event (u, v) makes each
    endpoint a neighbor of the other.
    """

    n_nodes: int
    initial_edges: np.ndarray
    events: EventLog
    features: np.ndarray
    t0: float = 0.0
    dynamic_attributes: np.ndarray | None = None
    _index: "_IncidenceIndex" = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_nodes)
        edges = np.asarray(self.initial_edges, dtype=np.int64).reshape(-1, 2)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise GraphDataError(f"feature matrix must have {n} rows, got shape {feats.shape}")
        for name, arr in (("initial edge", edges.ravel()), ("event u", self.events.u), ("event v", self.events.v)):
            if len(arr) and (arr.min() < 0 or arr.max() >= n):
                raise GraphDataError(f"{name} endpoint outside [0, {n})")
        if len(self.events) and self.events.t[0] < self.t0:
            raise GraphDataError(f"event at t={self.events.t[0]} precedes t0={self.t0}")
        edges.setflags(write=False)
        feats = feats.copy()
        feats.setflags(write=False)
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "initial_edges", edges)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "_index", _IncidenceIndex.build(n, edges, self.events, float(self.t0)))

    def incidences(self, u: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (neighbor, time, is_initial) incidences of ``u`` sorted by time (stable)."""
        return self._index.slice(u)

    def node_events(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """(other endpoint, time) of every event touching ``u``, time-ordered."""
        nbr, times, initial = self._index.slice(u)
        return nbr[~initial], times[~initial]

    def with_features(self, features: np.ndarray) -> "DynamicGraph":
        return DynamicGraph(self.n_nodes, self.initial_edges, self.events, features, self.t0, self.dynamic_attributes)


@dataclass(frozen=True)
class _IncidenceIndex:
    ptr: np.ndarray
    nbr: np.ndarray
    time: np.ndarray
    initial: np.ndarray

    @classmethod
    def build(cls, n: int, edges: np.ndarray, events: EventLog, t0: float) -> "_IncidenceIndex":
        e = len(edges)
        src = np.concatenate([edges[:, 0], edges[:, 1], events.u, events.v])
        dst = np.concatenate([edges[:, 1], edges[:, 0], events.v, events.u])
        time = np.concatenate([np.full(2 * e, t0), events.t, events.t])
        initial = np.concatenate([np.ones(2 * e, bool), np.zeros(2 * len(events), bool)])
        # file order among ties: initial edges first, then events in log order
        seq = np.concatenate([np.arange(e), np.arange(e), e + np.arange(len(events)), e + np.arange(len(events))])
        order = np.lexsort((seq, time, src))
        ptr = np.zeros(n + 1, np.int64)
        np.add.at(ptr, src + 1, 1)
        ptr = np.cumsum(ptr)
        return cls(ptr, dst[order], time[order], initial[order])

    def slice(self, u: int):
        a, b = self.ptr[u], self.ptr[u + 1]
        return self.nbr[a:b], self.time[a:b], self.initial[a:b]


def neighborhood_at(
    g: DynamicGraph,
    u: int,
    t: float,
    assignment: np.ndarray | None = None,
    max_len: int | None = None,
) -> History:
    """Neighbors of ``u`` connected before ``t``.

    Initial edges are always visible (time ``t0``); events are visible only when
    their timestamp is strictly earlier than ``t``. Repeated events on one pair
    collapse to the latest timestamp. ``max_len`` keeps only the most recently
    active neighbors.
    """
    if not 0 <= u < g.n_nodes:
        raise GraphDataError(f"unknown node id {u}")
    if t < g.t0:
        raise GraphDataError(f"query time {t} precedes t0={g.t0}")
    nbr, times, initial = g.incidences(u)
    keep = initial | (times < t)
    nbr, times = nbr[keep], times[keep]
    latest: dict[int, float] = {}
    for v, tv in zip(nbr.tolist(), times.tolist()):
        latest[v] = tv  # time-sorted, so the last write is the latest
    ids = np.array(sorted(latest), dtype=np.int64)
    tt = np.array([latest[v] for v in ids.tolist()], dtype=np.float64)
    if max_len is not None and len(ids) > max_len:
        recent = np.sort(np.argsort(-tt, kind="stable")[:max_len])
        ids, tt = ids[recent], tt[recent]
    clusters = np.zeros(len(ids), np.int64) if assignment is None else np.asarray(assignment)[ids].astype(np.int64)
    t_bar = float(times.max()) if len(times) else g.t0
    return History(int(u), ids, tt, clusters, t_bar)


# ---------------------------------------------------------------------------
# file formats


def load_events(
    path: str | Path,
    n_nodes: int | None = None,
    features: np.ndarray | None = None,
    initial_edges: np.ndarray | None = None,
    t0: float | None = None,
    tolerance: float = 0.0,
) -> DynamicGraph:
    """Read an event CSV with header ``u,v,op,t`` into a validated graph.

    Timestamps may decrease by at most ``tolerance`` between consecutive rows;
    such near-ties are stably sorted. Anything larger is rejected with the line
    number of the first offending row.
    """
    events: list[Event] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["u", "v", "op", "t"]:
            raise GraphDataError(f"{path}: line 1: expected header 'u,v,op,t', got {header!r}")
        running_max = -np.inf
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise GraphDataError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            try:
                u, v = int(row[0]), int(row[1])
                t = float(row[3])
            except ValueError as exc:
                raise GraphDataError(f"{path}: line {lineno}: {exc}") from None
            op = row[2].strip()
            if op.lower() == DELETE.lower():
                raise UnsupportedOperationError(f"{path}: line {lineno}: edge deletion is not supported")
            if op.lower() != ADD.lower():
                raise GraphDataError(f"{path}: line {lineno}: unknown operation {op!r}")
            if u == v:
                raise GraphDataError(f"{path}: line {lineno}: self-loop event ({u},{v})")
            if u < 0 or v < 0:
                raise GraphDataError(f"{path}: line {lineno}: negative node id")
            if not np.isfinite(t):
                raise GraphDataError(f"{path}: line {lineno}: non-finite timestamp")
            if t < running_max - tolerance:
                raise GraphDataError(f"{path}: line {lineno}: timestamp {t} is earlier than a previous row ({running_max})")
            running_max = max(running_max, t)
            events.append(Event(u, v, ADD, t))
    log = EventLog.from_events(events)
    edges = np.zeros((0, 2), np.int64) if initial_edges is None else np.asarray(initial_edges, np.int64).reshape(-1, 2)
    if n_nodes is None:
        ids = np.concatenate([log.u, log.v, edges.ravel()])
        n_nodes = int(ids.max()) + 1 if len(ids) else 0
        if features is not None:
            n_nodes = max(n_nodes, len(features))
    if features is None:
        features = np.zeros((n_nodes, 0))
    if t0 is None:
        t0 = float(log.t[0]) if len(log) else 0.0
    return DynamicGraph(n_nodes, edges, log, features, t0)


def save_events(path: str | Path, events: EventLog | DynamicGraph) -> None:
    log = events.events if isinstance(events, DynamicGraph) else events
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("u,v,op,t\n")
        for u, v, t in zip(log.u.tolist(), log.v.tolist(), log.t.tolist()):
            fh.write(f"{u},{v},{ADD},{t!r}\n")


def load_edges(path: str | Path) -> np.ndarray:
    """Edge list CSV with header ``u,v``."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["u", "v"]:
            raise GraphDataError(f"{path}: line 1: expected header 'u,v'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError) as exc:
                raise GraphDataError(f"{path}: line {lineno}: {exc}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def save_edges(path: str | Path, edges: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("u,v\n")
        for u, v in np.asarray(edges).reshape(-1, 2).tolist():
            fh.write(f"{u},{v}\n")


def load_features(path: str | Path) -> np.ndarray:
    """Dense node features: binary layout if the magic bytes match, else headerless CSV."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == FEATURE_MAGIC:
        blob = path.read_bytes()
        n, f = struct.unpack_from("<QQ", blob, 8)
        data = np.frombuffer(blob, dtype="<f8", offset=24)
        if data.size != n * f:
            raise GraphDataError(f"{path}: expected {n * f} values, found {data.size}")
        return data.reshape(n, f).astype(np.float64)
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise GraphDataError(f"{path}: {exc}") from None
    return arr


def save_features(path: str | Path, features: np.ndarray, binary: bool = False) -> None:
    """Write features as CSV, or as ``magic | N uint64 | F uint64 | row-major float64 LE``."""
    x = np.ascontiguousarray(features, dtype="<f8")
    if binary:
        Path(path).write_bytes(FEATURE_MAGIC + struct.pack("<QQ", *x.shape) + x.tobytes())
    else:
        np.savetxt(path, x, delimiter=",", fmt="%.17g")


def load_readings(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Traffic CSV ``timestamp,sensor_0,...``; returns (timestamps (T,), readings (T, N))."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0].strip() != "timestamp":
        raise GraphDataError(f"{path}: line 1: expected header starting with 'timestamp'")
    for i, name in enumerate(header[1:]):
        if name.strip() != f"sensor_{i}":
            raise GraphDataError(f"{path}: line 1: column {i + 1} should be 'sensor_{i}', got {name!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    ts = data[:, 0]
    if np.any(np.diff(ts) <= 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 3
        raise GraphDataError(f"{path}: line {bad}: timestamps must be strictly increasing")
    return ts, data[:, 1:]


def save_readings(path: str | Path, timestamps: np.ndarray, readings: np.ndarray) -> None:
    n = readings.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("timestamp," + ",".join(f"sensor_{i}" for i in range(n)) + "\n")
        for t, row in zip(np.asarray(timestamps).tolist(), np.asarray(readings).tolist()):
            fh.write(repr(float(t)) + "," + ",".join(repr(float(x)) for x in row) + "\n")


# ---------------------------------------------------------------------------
# traffic congestion events


def hour_of_day(timestamps: np.ndarray) -> np.ndarray:
    return (np.floor(np.mod(timestamps, SECONDS_PER_DAY) / SECONDS_PER_HOUR)).astype(np.int64)


def congestion_thresholds(
    timestamps: np.ndarray, readings: np.ndarray, train_until: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per (hour-of-day, sensor) mean and population std over the training window."""
    ts = np.asarray(timestamps, np.float64)
    x = _sensor_matrix(readings)
    window = np.ones(len(ts), bool) if train_until is None else ts < train_until
    hours = hour_of_day(ts[window])
    xw = x[window]
    mu = np.full((24, x.shape[1]), np.nan)
    sd = np.zeros((24, x.shape[1]))
    for h in np.unique(hours):
        rows = xw[hours == h]
        mu[h] = rows.mean(axis=0)
        sd[h] = rows.std(axis=0)
    return mu, sd


def derive_congestion_events(
    timestamps: np.ndarray,
    readings: np.ndarray,
    road_graph: np.ndarray | Sequence[tuple[int, int]],
    train_until: float | None = None,
    z: float = CONGESTION_Z,
) -> EventLog:
    """Turn significant speed drops into edge-addition events.

    A sensor is congested at a timestamp when its reading is strictly below
    ``mu_h - z * sigma_h`` for that hour of day (statistics from readings before
    ``train_until``). Every road edge incident to a congested sensor receives an
    Add event ``(sensor, neighbor)`` at that timestamp. Buckets with zero spread
    never fire.
    """
    ts = np.asarray(timestamps, np.float64)
    x = _sensor_matrix(readings)
    if len(ts) != len(x):
        raise GraphDataError("timestamps and readings disagree in length")
    if len(ts) < 2 or ts[-1] - ts[0] < SECONDS_PER_DAY - np.min(np.diff(ts)) - 1e-9:
        raise GraphDataError("readings must cover at least one full day")
    mu, sd = congestion_thresholds(ts, x, train_until)
    hours = hour_of_day(ts)
    thresh = mu[hours] - z * sd[hours]
    fired = (x < thresh) & (sd[hours] > 0)
    adjacency = _adjacency_lists(road_graph, x.shape[1])
    us, vs, tt = [], [], []
    for step, sensor in zip(*np.nonzero(fired)):
        for nb in adjacency[sensor]:
            us.append(sensor)
            vs.append(nb)
            tt.append(ts[step])
    if not us:
        return EventLog.empty()
    return EventLog(np.array(us), np.array(vs), np.array(tt))


def _sensor_matrix(readings: np.ndarray) -> np.ndarray:
    x = np.asarray(readings, np.float64)
    if x.ndim == 3:
        x = x[..., 0]
    if x.ndim != 2:
        raise GraphDataError("readings must be (T, N) or (T, N, P)")
    return x


def _adjacency_lists(road_graph, n: int) -> list[list[int]]:
    if hasattr(road_graph, "tocoo"):
        coo = road_graph.tocoo()
        pairs = np.stack([coo.row, coo.col], axis=1)[coo.data != 0]
    else:
        arr = np.asarray(road_graph)
        # integer (E, 2) arrays are edge lists; float/bool square arrays are adjacency matrices
        if arr.ndim == 2 and arr.shape == (n, n) and arr.dtype.kind in "fb":
            pairs = np.argwhere(arr != 0)
        else:
            pairs = arr.reshape(-1, 2)
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for a, b in pairs.tolist():
        if a != b:
            nbrs[a].add(b)
            nbrs[b].add(a)
    return [sorted(s) for s in nbrs]
