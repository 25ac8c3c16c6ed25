"""Data pipelines for the three time-conditioned tasks.

Each task object owns its split data and exposes the same small surface used by
the trainer: ``n_train``, ``objective``, ``validate`` and ``evaluate``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor

from ..cam import MaskPlan, sample_plan
from ..dyngraph import DynamicGraph, EventLog, GraphDataError, History, derive_congestion_events, neighborhood_at
from ..encoder import DTYPE, TokenBatch, encode_input, tokens_from_histories
from .metrics import MetricReport, evaluate, ranks
from .model import TaskModel, path_likelihood, task_loss, total_objective

DEFAULT_MAX_LEN = 50
DEFAULT_TPP_EVENTS = 16


@dataclass(frozen=True)
class TimeAxis:
    """Maps raw seconds to model units ``(t - origin) / scale``."""

    origin: float
    scale: float

    def __call__(self, t) -> np.ndarray:
        return (np.asarray(t, np.float64) - self.origin) / self.scale

    def span(self, dt) -> np.ndarray:
        return np.asarray(dt, np.float64) / self.scale


def _median_gap(chunks: Sequence[np.ndarray]) -> float:
    gaps = np.concatenate([np.diff(c) for c in chunks if len(c) > 1] + [np.zeros(0)])
    gaps = gaps[gaps > 0]
    return float(np.median(gaps)) if len(gaps) else 1.0


def _one_hot(assignment: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(assignment), k))
    out[np.arange(len(assignment)), assignment] = 1.0
    return out


def _tensor_batch(x, nbr, mask, cluster, ntime, time, elapsed) -> TokenBatch:
    return TokenBatch(
        torch.as_tensor(x, dtype=DTYPE),
        torch.as_tensor(nbr, dtype=torch.long),
        torch.as_tensor(mask, dtype=torch.bool),
        torch.as_tensor(cluster, dtype=torch.long),
        torch.as_tensor(ntime, dtype=DTYPE),
        torch.as_tensor(time, dtype=DTYPE),
        torch.as_tensor(elapsed, dtype=DTYPE),
    )


def _recent_events(times: np.ndarray, types: np.ndarray, cutoff: float, e: int, axis: TimeAxis):
    """Last ``e`` events strictly before ``cutoff`` as (times (e+1,), types (e,), valid (e,))."""
    end = int(np.searchsorted(times, cutoff, side="left"))
    start = max(0, end - e)
    tt, kk = axis(times[start:end]), types[start:end]
    out_t = np.zeros(e + 1)
    out_k = np.zeros(e, np.int64)
    valid = np.zeros(e, bool)
    n = len(tt)
    if n:
        out_t[0] = tt[0]
        out_t[1 : n + 1] = tt
        out_t[n + 1 :] = tt[-1]
        out_k[:n] = kk
        valid[:n] = True
    return out_t, out_k, valid


# ---------------------------------------------------------------------------
# link prediction


@dataclass
class LinkTask:
    """Sequences of (item, time) per user; users split into train/val/test.

    Validation and test users keep all but their last interaction as history and
    the last item as the target at its own timestamp.
    """

    item_ids: np.ndarray  # node id of each item column
    h0: np.ndarray  # (n_items, in_dim)
    clusters: np.ndarray  # (n_items,)
    train_seqs: list[tuple[np.ndarray, np.ndarray]]
    eval_seqs: dict[str, list[tuple[np.ndarray, np.ndarray, int, float]]]
    axis: TimeAxis
    gamma: float = 0.1
    max_len: int = DEFAULT_MAX_LEN
    ks: tuple[int, ...] = (10,)

    kind = "link"
    higher_is_better = True

    def __post_init__(self):
        self._train = self._tokens(self.train_seqs)

    @classmethod
    def from_graph(
        cls,
        g: DynamicGraph,
        assignment: np.ndarray,
        seed: int = 0,
        split: tuple[float, float, float] = (0.8, 0.1, 0.1),
        time_scale: float | None = None,
        **kw,
    ) -> "LinkTask":
        ev = g.events
        users = np.unique(ev.u)
        item_ids = np.unique(ev.v)
        if np.intersect1d(users, item_ids).size:
            raise GraphDataError("link task needs a bipartite stream: a node appears as both user and item")
        col = {int(v): i for i, v in enumerate(item_ids.tolist())}
        seqs = {}
        for u in users.tolist():
            sel = ev.u == u
            seqs[u] = (np.array([col[int(v)] for v in ev.v[sel]], np.int64), ev.t[sel].astype(np.float64))
        rng = np.random.default_rng(seed)
        eligible = np.array([u for u in users.tolist() if len(seqs[u][0]) >= 2])
        order = eligible[rng.permutation(len(eligible))]
        n_val = int(round(split[1] * len(order)))
        n_test = int(round(split[2] * len(order)))
        val_users = np.sort(order[:n_val])
        test_users = np.sort(order[n_val : n_val + n_test])
        held = set(val_users.tolist()) | set(test_users.tolist())
        train = [seqs[u] for u in users.tolist() if u not in held]

        def holdout(us):
            return [(seqs[u][0][:-1], seqs[u][1][:-1], int(seqs[u][0][-1]), float(seqs[u][1][-1])) for u in us.tolist()]

        scale = time_scale or _median_gap([s[1] for s in seqs.values()])
        k = int(assignment.max()) + 1
        h0 = encode_input(g.features[item_ids], _one_hot(assignment[item_ids], k)).numpy()
        return cls(
            item_ids,
            h0,
            np.asarray(assignment[item_ids], np.int64),
            train,
            {"val": holdout(val_users), "test": holdout(test_users)},
            TimeAxis(float(ev.t.min()) if len(ev) else g.t0, scale),
            **kw,
        )

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_train(self) -> int:
        return len(self.train_seqs)

    def _tokens(self, seqs, query_times=None) -> dict:
        ext = 0 if query_times is None else 1
        seqs = [(it[-self.max_len :], ts[-self.max_len :]) for it, ts in seqs]
        lens = np.array([len(it) for it, _ in seqs], np.int64)
        B = len(seqs)
        T = max(int(lens.max(initial=0)) + ext, 1)
        items = np.full((B, T), -1, np.int64)
        times = np.zeros((B, T))
        for b, (it, ts) in enumerate(seqs):
            n = len(it)
            items[b, :n] = it
            tt = self.axis(ts)
            times[b, :n] = tt
            last = tt[-1] if n else 0.0
            if ext:
                last = float(self.axis(query_times[b]))
                times[b, n] = last
            times[b, n + ext :] = last
        valid = items >= 0
        prev = np.concatenate([times[:, :1], times[:, :-1]], axis=1)
        elapsed = times - prev
        safe = items.clip(0)
        x = self.h0[safe] * valid[..., None]
        nbr = np.broadcast_to(np.arange(T), (B, T, T))
        mask = np.broadcast_to(valid[:, None, :], (B, T, T))
        clus = np.broadcast_to(self.clusters[safe][:, None, :], (B, T, T))
        ntime = np.broadcast_to(times[:, None, :], (B, T, T))
        batch = _tensor_batch(x, nbr.copy(), mask.copy(), clus.copy(), ntime.copy(), times, elapsed)
        path_t = np.concatenate([times[:, :1], np.where(valid, times, 0.0)], axis=1)
        for b in range(B):
            n = lens[b]
            if n:
                path_t[b, n + 1 :] = times[b, n - 1]
        return {
            "batch": batch,
            "items": items,
            "valid": valid,
            "lens": lens,
            "path_times": torch.from_numpy(path_t),
            "path_types": torch.from_numpy(self.clusters[safe]),
            "path_valid": torch.from_numpy(valid),
        }

    def objective(self, model: TaskModel, rows: np.ndarray, cfg, seed: int) -> tuple[Tensor, Tensor, Tensor | None]:
        d = self._train
        tb = d["batch"].select(torch.from_numpy(rows))
        valid = d["valid"][rows]
        B, T = valid.shape
        plan = sample_plan(tb, cfg.mask_ratio, seed, np.ones((B, T, 1)), valid, tie_keys=True)
        h, aux = model.embed(tb, plan, cfg.masking)
        loss = task_loss("link", model.head(h), torch.from_numpy(d["items"][rows].clip(0)), torch.from_numpy(plan.masked_queries))
        R = None
        if model.task.gamma > 0:
            idx = torch.from_numpy(rows)
            R = path_likelihood(
                model.encoder.last, aux[-1]["s"], d["path_times"][idx], d["path_types"][idx], d["path_valid"][idx],
                cfg.integrator, cfg.mc_samples, seed,
            )
        return total_objective(loss, R, model.task.gamma), loss, R

    def score(self, model: TaskModel, histories, query_times, masking: str = "cam", chunk: int = 256) -> np.ndarray:
        """Softmax distribution over items for each (history, future time) query."""
        out = []
        with torch.no_grad():
            for a in range(0, len(histories), chunk):
                hs = histories[a : a + chunk]
                d = self._tokens(hs, query_times[a : a + chunk])
                B, T = d["valid"].shape
                pos = np.minimum(d["lens"], self.max_len)
                q = np.zeros((B, T), bool)
                q[np.arange(B), pos] = True
                plan = MaskPlan(q, np.zeros(d["batch"].nbr.shape, bool), 0.0, 0, np.ones((B, T, 1)))
                h, _ = model.embed(d["batch"], plan, "cam" if masking == "none" else masking)
                logits = model.head(h[torch.arange(B), torch.from_numpy(pos)])
                out.append(torch.softmax(logits, dim=-1).numpy())
        return np.concatenate(out) if out else np.zeros((0, self.n_items))

    def predict(self, model: TaskModel, split: str, masking: str = "cam") -> tuple[np.ndarray, np.ndarray]:
        rows = self.eval_seqs[split]
        scores = self.score(model, [(it, ts) for it, ts, _, _ in rows], [t for *_, t in rows], masking)
        return scores, np.array([r[2] for r in rows], np.int64)

    def popularity_scores(self) -> np.ndarray:
        counts = np.zeros(self.n_items)
        for it, _ in self.train_seqs:
            np.add.at(counts, it, 1.0)
        for split in self.eval_seqs.values():
            for it, *_ in split:
                np.add.at(counts, it, 1.0)
        return counts

    def evaluate(self, model: TaskModel, split: str = "test", masking: str = "cam") -> list[MetricReport]:
        scores, truth = self.predict(model, split, masking)
        return [evaluate("link", scores, truth, self.ks, scope=split)]

    def validate(self, model: TaskModel, masking: str = "cam") -> float:
        scores, truth = self.predict(model, "val", masking)
        if len(truth) == 0:
            return math.nan
        return float(np.mean(ranks(scores, truth) <= self.ks[0]))


# ---------------------------------------------------------------------------
# node classification


def _with_self(h: History, cluster: int) -> History:
    pos = int(np.searchsorted(h.neighbors, h.owner))
    return History(
        h.owner,
        np.insert(h.neighbors, pos, h.owner),
        np.insert(h.times, pos, h.t_bar),
        np.insert(h.clusters, pos, cluster),
        h.t_bar,
    )


@dataclass
class NodeTask:
    """Node labels over a dynamic graph, split along time by each node's first event.

    For a split with cutoff ``c`` every node sees the events strictly before ``c``
    and is queried at its next event at or after ``c`` (or at ``horizon``).
    """

    g: DynamicGraph
    labels: np.ndarray  # (N,), -1 for unlabeled
    assignment: np.ndarray
    cutoffs: dict[str, float]
    nodes: dict[str, np.ndarray]
    horizon: float
    axis: TimeAxis
    gamma: float = 0.1
    max_len: int | None = None
    tpp_events: int = DEFAULT_TPP_EVENTS

    kind = "node"
    higher_is_better = True

    def __post_init__(self):
        self.n_classes = int(self.labels.max()) + 1
        k = int(self.assignment.max()) + 1
        self.h0 = encode_input(self.g.features, _one_hot(self.assignment, k))
        self._splits = {s: self._tokens(c) for s, c in self.cutoffs.items()}

    @classmethod
    def from_graph(
        cls,
        g: DynamicGraph,
        labels: np.ndarray,
        assignment: np.ndarray,
        t_split: tuple[float, float] | None = None,
        horizon: float | None = None,
        time_scale: float | None = None,
        **kw,
    ) -> "NodeTask":
        labels = np.asarray(labels, np.int64)
        n = g.n_nodes
        first = np.full(n, np.inf)
        np.minimum.at(first, g.events.u, g.events.t)
        np.minimum.at(first, g.events.v, g.events.t)
        t_end = float(g.events.t.max()) if len(g.events) else g.t0
        if t_split is None:
            t_split = tuple(np.quantile(g.events.t, [0.7, 0.85]).tolist()) if len(g.events) else (g.t0, g.t0)
        t1, t2 = t_split
        horizon = t_end + 1.0 if horizon is None else horizon
        lab = labels >= 0
        nodes = {
            "train": np.flatnonzero(lab & (first < t1)),
            "val": np.flatnonzero(lab & (first >= t1) & (first < t2)),
            "test": np.flatnonzero(lab & (first >= t2)),
        }
        scale = time_scale or _median_gap([g.events.t])
        cutoffs = {"train": t1, "val": t2, "test": horizon}
        return cls(g, labels, np.asarray(assignment, np.int64), cutoffs, nodes, horizon, TimeAxis(g.t0, scale), **kw)

    @property
    def n_train(self) -> int:
        return len(self.nodes["train"])

    def query_times(self, cutoff: float) -> np.ndarray:
        out = np.full(self.g.n_nodes, self.horizon)
        for u in range(self.g.n_nodes):
            _, times = self.g.node_events(u)
            nxt = times[times >= cutoff]
            if len(nxt):
                out[u] = nxt[0]
        return out

    def _tokens(self, cutoff: float) -> dict:
        g = self.g
        hists = [
            _with_self(neighborhood_at(g, u, cutoff, self.assignment, self.max_len), int(self.assignment[u]))
            for u in range(g.n_nodes)
        ]
        qt = np.maximum(self.query_times(cutoff), [h.t_bar for h in hists])
        batch = tokens_from_histories(self.h0, hists, qt, self.axis.origin, self.axis.scale)
        paths = [
            _recent_events(t, self.assignment[o], cutoff, self.tpp_events, self.axis)
            for o, t in (g.node_events(u) for u in range(g.n_nodes))
        ]
        return {
            "batch": batch,
            "path_times": torch.from_numpy(np.stack([p[0] for p in paths])),
            "path_types": torch.from_numpy(np.stack([p[1] for p in paths])),
            "path_valid": torch.from_numpy(np.stack([p[2] for p in paths])),
        }

    def objective(self, model: TaskModel, rows: np.ndarray, cfg, seed: int):
        d = self._splits["train"]
        tb = d["batch"]
        n = self.g.n_nodes
        targets = np.zeros(n, bool)
        targets[self.nodes["train"][rows]] = True
        y = np.zeros((1, n, self.n_classes))
        y[0, np.flatnonzero(targets), self.labels[targets]] = 1.0
        plan = sample_plan(tb, cfg.mask_ratio, seed, y, targets[None])
        h, aux = model.embed(tb, plan, cfg.masking)
        loss = task_loss("node", model.head(h), torch.from_numpy(self.labels.clip(0))[None], torch.from_numpy(targets)[None])
        R = None
        if model.task.gamma > 0:
            idx = torch.from_numpy(np.flatnonzero(targets))
            E = self.tpp_events
            states = aux[-1]["s"][0, idx][:, None].expand(len(idx), E, *aux[-1]["s"].shape[-2:])
            R = path_likelihood(
                model.encoder.last, states, d["path_times"][idx], d["path_types"][idx], d["path_valid"][idx],
                cfg.integrator, cfg.mc_samples, seed,
            )
        return total_objective(loss, R, model.task.gamma), loss, R

    def predict(self, model: TaskModel, split: str) -> tuple[np.ndarray, np.ndarray]:
        """Class probabilities (masking off, raw features) for the split's nodes, and their labels."""
        with torch.no_grad():
            h, _ = model.embed(self._splits[split]["batch"])
            prob = torch.softmax(model.head(h)[0], dim=-1).numpy()
        idx = self.nodes[split]
        return prob[idx], self.labels[idx]

    def evaluate(self, model: TaskModel, split: str = "test", masking: str = "cam") -> list[MetricReport]:
        prob, truth = self.predict(model, split)
        return [evaluate("node", prob.argmax(1), truth, scope=split)]

    def validate(self, model: TaskModel, masking: str = "cam") -> float:
        prob, truth = self.predict(model, "val")
        if len(truth) == 0:
            return math.nan
        return evaluate("node", prob.argmax(1), truth)["Macro-F1"]


# ---------------------------------------------------------------------------
# traffic forecasting


@dataclass
class TrafficTask:
    """Sensor readings on a road graph, predicted ``h`` steps past each origin.

    Congestion events (from training-window hourly statistics) form the dynamic
    graph; model inputs are z-scored reading windows.
    """

    timestamps: np.ndarray
    readings: np.ndarray  # (S, N) raw
    road_edges: np.ndarray  # (E, 2)
    assignment: np.ndarray
    window: int = 12
    horizons: tuple[int, ...] = (3, 6, 9)
    train_horizons: tuple[int, ...] | None = None
    split: tuple[float, float, float] = (0.7, 0.1, 0.2)
    gamma: float = 0.1
    tpp_events: int = DEFAULT_TPP_EVENTS
    z: float = 1.645

    kind = "traffic"
    higher_is_better = False

    def __post_init__(self):
        ts = np.asarray(self.timestamps, np.float64)
        x = np.asarray(self.readings, np.float64)
        x = x[..., 0] if x.ndim == 3 else x
        S, N = x.shape
        self.n_nodes = N
        self.train_horizons = tuple(self.train_horizons or self.horizons)
        h_max = max(self.horizons + self.train_horizons)
        origins = np.arange(self.window - 1, S - h_max)
        if len(origins) < 3:
            raise GraphDataError("not enough readings for the requested window and horizons")
        n_tr = int(round(self.split[0] * len(origins)))
        n_va = int(round(self.split[1] * len(origins)))
        self.origins = {
            "train": origins[:n_tr],
            "val": origins[n_tr : n_tr + n_va],
            "test": origins[n_tr + n_va :],
        }
        train_end = int(self.origins["train"][-1]) + h_max
        self.mean = float(x[: train_end + 1].mean())
        self.std = float(x[: train_end + 1].std()) or 1.0
        self.z_readings = (x - self.mean) / self.std
        self.axis = TimeAxis(float(ts[0]), float(np.median(np.diff(ts))))
        self.events = derive_congestion_events(ts, x, self.road_edges, train_until=float(ts[train_end]) + 1e-9, z=self.z)
        self.graph = DynamicGraph(N, self.road_edges, self.events, np.zeros((N, 0)), float(ts[0]))
        self._build(ts)

    def _build(self, ts: np.ndarray) -> None:
        g, N = self.graph, self.n_nodes
        k = int(self.assignment.max()) + 1
        nb_lists = []
        for u in range(N):
            nbr, _, _ = g.incidences(u)
            nb_lists.append(sorted(set(nbr.tolist()) | {u}))
        M = max(len(l) for l in nb_lists)
        nbr = np.full((N, M), N, np.int64)
        mask = np.zeros((N, M), bool)
        for u, l in enumerate(nb_lists):
            nbr[u, : len(l)] = l
            mask[u, : len(l)] = True
        S = len(ts)
        cut = ts[np.minimum(np.arange(S) + 1, S - 1)]
        cut[-1] = np.inf
        # latest event time on each (u, slot) pair strictly before ts[tau + 1]
        etime = np.full((S, N, M), g.t0)
        for u in range(N):
            others, times, _ = g.incidences(u)
            for m, v in enumerate(nb_lists[u]):
                if v == u:
                    continue
                tv = times[others == v]
                pos = np.searchsorted(tv, cut, side="left") - 1
                etime[:, u, m] = np.where(pos >= 0, tv[np.maximum(pos, 0)], g.t0)
        etime = np.where(mask[None], etime, -np.inf)
        tbar = etime.max(-1)
        self_slot = nbr == np.arange(N)[:, None]
        etime = np.where(self_slot[None], tbar[..., None], np.where(mask[None], etime, 0.0))
        self._nbr, self._mask = nbr, mask
        self._clus = np.where(mask, self.assignment[np.minimum(nbr, N - 1)], 0)
        self._etime, self._tbar = etime, tbar
        onehot = _one_hot(self.assignment, k)
        self._onehot = onehot
        # recent congestion events per (origin, node) for the likelihood term
        E = self.tpp_events
        pt = np.zeros((S, N, E + 1))
        pk = np.zeros((S, N, E), np.int64)
        pv = np.zeros((S, N, E), bool)
        for u in range(N):
            others, times = g.node_events(u)
            types = self.assignment[others]
            for tau in range(S):
                pt[tau, u], pk[tau, u], pv[tau, u] = _recent_events(times, types, cut[tau], E, self.axis)
        self._pt, self._pk, self._pv = torch.from_numpy(pt), torch.from_numpy(pk), torch.from_numpy(pv)
        self._ts = ts

    def pairs(self, split: str, horizons: Sequence[int] | None = None) -> np.ndarray:
        hs = self.train_horizons if horizons is None else horizons
        o = self.origins[split]
        return np.array([(t, h) for t in o.tolist() for h in hs], np.int64).reshape(-1, 2)

    @property
    def n_train(self) -> int:
        return len(self.pairs("train"))

    def tokens(self, pairs: np.ndarray) -> TokenBatch:
        tau, h = pairs[:, 0], pairs[:, 1]
        B, N = len(pairs), self.n_nodes
        win = np.stack([self.z_readings[t - self.window + 1 : t + 1].T for t in tau.tolist()])  # (B, N, window)
        x = np.concatenate([win, np.broadcast_to(self._onehot, (B, *self._onehot.shape))], axis=-1)
        tq = self._ts[tau + h]
        time = np.broadcast_to(self.axis(tq)[:, None], (B, N))
        elapsed = self.axis.span(tq[:, None] - self._tbar[tau])
        return _tensor_batch(
            x,
            np.broadcast_to(self._nbr, (B, *self._nbr.shape)).copy(),
            np.broadcast_to(self._mask, (B, *self._mask.shape)).copy(),
            np.broadcast_to(self._clus, (B, *self._clus.shape)).copy(),
            self.axis(self._etime[tau]),
            time.copy(),
            elapsed,
        )

    def targets(self, pairs: np.ndarray) -> np.ndarray:
        return self.z_readings[pairs[:, 0] + pairs[:, 1]]

    def objective(self, model: TaskModel, rows: np.ndarray, cfg, seed: int):
        pairs = self.pairs("train")[rows]
        tb = self.tokens(pairs)
        y = self.targets(pairs)
        plan = sample_plan(tb, cfg.mask_ratio, seed, y[..., None])
        h, aux = model.embed(tb, plan, cfg.masking)
        loss = task_loss("traffic", model.head(h), torch.from_numpy(y), torch.ones(y.shape, dtype=torch.bool))
        R = None
        if model.task.gamma > 0:
            s = aux[-1]["s"]
            B, N, H, dh = s.shape
            E = self.tpp_events
            states = s.reshape(B * N, 1, H, dh).expand(B * N, E, H, dh)
            tau = torch.from_numpy(pairs[:, 0])
            R = path_likelihood(
                model.encoder.last, states, self._pt[tau].reshape(B * N, E + 1), self._pk[tau].reshape(B * N, E),
                self._pv[tau].reshape(B * N, E), cfg.integrator, cfg.mc_samples, seed,
            )
        return total_objective(loss, R, model.task.gamma), loss, R

    def predict(self, model: TaskModel, pairs: np.ndarray, chunk: int = 128) -> np.ndarray:
        """Readings in original units (masking off) for each (origin, horizon) pair."""
        out = []
        with torch.no_grad():
            for a in range(0, len(pairs), chunk):
                h, _ = model.embed(self.tokens(pairs[a : a + chunk]))
                out.append(model.head(h).numpy())
        z = np.concatenate(out) if out else np.zeros((0, self.n_nodes))
        return z * self.std + self.mean

    def truth(self, pairs: np.ndarray) -> np.ndarray:
        return self.targets(pairs) * self.std + self.mean

    def evaluate(self, model: TaskModel, split: str = "test", masking: str = "cam") -> list[MetricReport]:
        reports = []
        for h in self.horizons:
            pairs = self.pairs(split, [h])
            reports.append(evaluate("traffic", self.predict(model, pairs), self.truth(pairs), scope=f"{split}@{h}"))
        return reports

    def validate(self, model: TaskModel, masking: str = "cam") -> float:
        pairs = self.pairs("val")
        if len(pairs) == 0:
            return math.nan
        return evaluate("traffic", self.predict(model, pairs), self.truth(pairs))["RMSE"]
