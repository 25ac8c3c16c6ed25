"""Weighted K-means (linear-kernel special case of weighted kernel K-means).

Nodes in one cluster share conditional-intensity parameters; unseen nodes are
assigned inductively to their nearest centroid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

MAX_ITER = 100


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray
    assignment: np.ndarray
    objective_trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def one_hot(self) -> np.ndarray:
        """Assignment as an N x K indicator matrix."""
        out = np.zeros((len(self.assignment), self.k))
        out[np.arange(len(self.assignment)), self.assignment] = 1.0
        return out


def _sq_dist(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkf,nkf->nk", diff, diff)


def objective(x: np.ndarray, weights: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    """Weighted within-cluster squared distance."""
    diff = x - centroids[assignment]
    return float(np.sum(weights * np.einsum("nf,nf->n", diff, diff)))


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(len(x)))]
    d = _sq_dist(x, x[chosen])[:, 0]
    for _ in range(1, k):
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, _sq_dist(x, x[[nxt]])[:, 0])
    return x[chosen].copy()


def _weighted_means(x, w, assignment, k, centroids):
    out = centroids.copy()
    for j in range(k):
        m = assignment == j
        if m.any():
            out[j] = (w[m, None] * x[m]).sum(axis=0) / w[m].sum()
    return out


def fit_clusters(
    x: np.ndarray,
    k: int,
    weights: np.ndarray | None = None,
    seed: int = 0,
    max_iter: int = MAX_ITER,
) -> ClusterModel:
    """Lloyd iterations from farthest-point seeding until the assignment stops changing.

    An emptied cluster is re-seeded at the point currently farthest from its own
    centroid; this is logged, never silent.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be an N x F matrix")
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be a positive N-vector")
    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(x, k, rng)
    assignment = np.argmin(_sq_dist(x, centroids), axis=1)
    trace = []
    for _ in range(max_iter):
        centroids = _weighted_means(x, w, assignment, k, centroids)
        trace.append(objective(x, w, centroids, assignment))
        new = np.argmin(_sq_dist(x, centroids), axis=1)
        for j in range(k):
            if not np.any(new == j):
                own = _sq_dist(x, centroids)[np.arange(n), new]
                far = int(np.argmax(own))
                logger.warning("cluster %d emptied; re-seeding from point %d", j, far)
                centroids[j] = x[far]
                new[far] = j
        if np.array_equal(new, assignment):
            break
        assignment = new
    centroids = _weighted_means(x, w, assignment, k, centroids)
    return ClusterModel(centroids, assignment.astype(np.int64), tuple(trace))


def assign(model: ClusterModel, x: np.ndarray) -> int | np.ndarray:
    """Nearest centroid; ties go to the smallest cluster id. Accepts one vector or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.centroids.shape[1]:
        raise ValueError(f"expected {model.centroids.shape[1]} features, got {x.shape[-1]}")
    if x.ndim == 1:
        return int(np.argmin(_sq_dist(x[None], model.centroids)[0]))
    return np.argmin(_sq_dist(x, model.centroids), axis=1)


def save_clusters(directory: str | Path, model: ClusterModel) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "assignment.csv", model.assignment, fmt="%d", header="cluster", comments="")
    np.savetxt(directory / "centroids.csv", model.centroids, delimiter=",", fmt="%.17g")


def load_clusters(directory: str | Path) -> ClusterModel:
    directory = Path(directory)
    assignment = np.loadtxt(directory / "assignment.csv", skiprows=1, dtype=np.int64, ndmin=1)
    centroids = np.loadtxt(directory / "centroids.csv", delimiter=",", ndmin=2)
    return ClusterModel(centroids, assignment)


def structural_features(n_nodes: int, u: np.ndarray, v: np.ndarray, t: np.ndarray, period: float = 86400.0) -> np.ndarray:
    """Per-node descriptors for graphs without informative features:
    log event count and the circular mean of event phase within ``period``."""
    ends = np.concatenate([u, v]).astype(np.int64)
    phase = 2 * np.pi * np.mod(np.concatenate([t, t]), period) / period
    count = np.bincount(ends, minlength=n_nodes).astype(np.float64)
    c = np.bincount(ends, weights=np.cos(phase), minlength=n_nodes)
    s = np.bincount(ends, weights=np.sin(phase), minlength=n_nodes)
    denom = np.maximum(count, 1.0)
    return np.stack([np.log1p(count), c / denom, s / denom], axis=1)
