"""Generators for the synthetic fixtures used in tests, the acceptance suite and the bundled data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyngraph import SECONDS_PER_DAY, SECONDS_PER_HOUR, DynamicGraph, EventLog


@dataclass(frozen=True)
class LinkStream:
    graph: DynamicGraph
    n_users: int
    n_items: int
    habits: list[np.ndarray]  # habit item node ids per user


def periodic_link_stream(
    n_users: int = 350,
    n_items: int = 150,
    days: int = 10,
    habits_per_user: tuple[int, int] = (2, 3),
    noise_per_day: float = 1.0,
    jitter_hours: float = 1.0,
    zipf: float = 1.2,
    seed: int = 0,
) -> LinkStream:
    """Bipartite purchase stream: each user re-buys a few habit items every 24 hours
    at a personal hour of day, plus occasional purchases of popular items.

    Users are nodes ``0..n_users-1``; items follow. Features are one-hot item ids
    (user rows are zero).
    """
    rng = np.random.default_rng(seed)
    pop = 1.0 / np.arange(1, n_items + 1) ** zipf
    pop /= pop.sum()
    pop_order = rng.permutation(n_items)
    us, vs, ts, habits = [], [], [], []
    for u in range(n_users):
        k = int(rng.integers(habits_per_user[0], habits_per_user[1] + 1))
        items = rng.choice(n_items, size=k, replace=False)
        habits.append(n_users + items)
        hours = rng.uniform(0, 24, size=k)
        start = int(rng.integers(0, 2))
        for d in range(start, days):
            for it, h in zip(items, hours):
                if rng.random() < 0.9:
                    t = d * SECONDS_PER_DAY + (h + rng.normal(0, jitter_hours)) * SECONDS_PER_HOUR
                    us.append(u)
                    vs.append(n_users + it)
                    ts.append(t)
            for _ in range(rng.poisson(noise_per_day)):
                us.append(u)
                vs.append(n_users + pop_order[rng.choice(n_items, p=pop)])
                ts.append(d * SECONDS_PER_DAY + rng.uniform(0, 24) * SECONDS_PER_HOUR)
    ts = np.array(ts) - min(ts) + 1.0
    order = np.argsort(ts, kind="stable")
    ev = EventLog(np.array(us)[order], np.array(vs)[order], ts[order])
    n = n_users + n_items
    feats = np.zeros((n, n_items))
    feats[n_users + np.arange(n_items), np.arange(n_items)] = 1.0
    return LinkStream(DynamicGraph(n, np.zeros((0, 2), np.int64), ev, feats, 0.0), n_users, n_items, habits)


@dataclass(frozen=True)
class TrafficFixture:
    timestamps: np.ndarray
    readings: np.ndarray  # (S, N)
    road_edges: np.ndarray  # (E, 2)


def grid_edges(rows: int, cols: int) -> np.ndarray:
    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return np.array(edges, np.int64)


def traffic_fixture(
    rows: int = 4,
    cols: int = 6,
    days: int = 8,
    step_minutes: int = 15,
    incident_rate_per_day: float = 0.6,
    seed: int = 0,
) -> TrafficFixture:
    """Speeds on a grid road network with daily rush-hour dips and random incidents.

    An incident cuts speed at its sensor, spreads to adjacent sensors one step
    later at reduced strength, and recovers exponentially.
    """
    rng = np.random.default_rng(seed)
    n = rows * cols
    edges = grid_edges(rows, cols)
    nbrs = [[] for _ in range(n)]
    for a, b in edges.tolist():
        nbrs[a].append(b)
        nbrs[b].append(a)
    steps_per_day = 24 * 60 // step_minutes
    S = days * steps_per_day
    ts = np.arange(S, dtype=np.float64) * step_minutes * 60
    hour = (ts % SECONDS_PER_DAY) / SECONDS_PER_HOUR
    base = 60 + rng.normal(0, 3, size=n)
    depth = rng.uniform(8, 18, size=n)
    rush = np.exp(-0.5 * ((hour - 8) / 1.0) ** 2) + np.exp(-0.5 * ((hour - 17.5) / 1.2) ** 2)
    speed = base[None, :] - depth[None, :] * rush[:, None]
    drop = np.zeros((S, n))
    recovery = rng.uniform(4, 8, size=n)
    lag = np.arange(S)
    for u in range(n):
        for start in np.flatnonzero(rng.random(S) < incident_rate_per_day / steps_per_day):
            sev = rng.uniform(18, 30)
            for v, scale, delay in [(u, 1.0, 0)] + [(w, 0.6, 1) for w in nbrs[u]]:
                k = lag[start + delay :] - (start + delay)
                drop[start + delay :, v] += sev * scale * np.exp(-k / recovery[v])
    readings = speed - np.minimum(drop, 45) + rng.normal(0, 1.5, size=(S, n))
    return TrafficFixture(ts, readings, edges)


def separable_nodes(n: int = 60, n_events: int = 240, gap: float = 6.0, seed: int = 0):
    """Two Gaussian blobs of node features with labels equal to the blob, plus random events.

    Returns (graph, labels).
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    feats = rng.normal(0, 1, size=(n, 4))
    feats[:, 0] += np.where(labels == 1, gap / 2, -gap / 2)
    u = rng.integers(0, n, size=n_events)
    v = (u + rng.integers(1, n, size=n_events)) % n
    t = np.sort(rng.uniform(0, 100, size=n_events))
    return DynamicGraph(n, np.zeros((0, 2), np.int64), EventLog(u, v, t), feats, 0.0), labels


def bandlimited_scores(basis_vectors: np.ndarray, band: np.ndarray, n_examples: int, seed: int = 0):
    """Score matrix (N, n_examples) supported only on ``band`` columns of the basis,
    with each example's target at its highest-scoring node."""
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=(len(band), n_examples))
    scores = basis_vectors[:, band] @ coef
    return scores, scores.argmax(axis=0)
