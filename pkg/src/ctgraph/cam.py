"""Correlation-adjusted masking: masked keys are dropped, masked queries carry a
label-aware query vector, and every query/key gets a sinusoidal time code."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import torch

if TYPE_CHECKING:
    from .dyngraph import DynamicGraph
    from .encoder import Encoder, TokenBatch

DEFAULT_RATIO = 0.2


def temporal_encoding(t, d: int):
    """Sinusoidal code of width ``d``: sin at even index i, cos at odd index i,
    both with frequency 10000^{-(i - i mod 2)/d}. Works on numpy or torch input."""
    if d % 2:
        raise ValueError(f"temporal encoding width must be even, got {d}")
    expo = np.arange(0, d, 2, dtype=np.float64) / d
    if isinstance(t, torch.Tensor):
        arg = t.to(torch.float64)[..., None] / torch.from_numpy(10000.0**expo)
        out = torch.stack([torch.sin(arg), torch.cos(arg)], dim=-1)
        return out.reshape(*t.shape, d)
    t = np.asarray(t, dtype=np.float64)
    arg = t[..., None] / 10000.0**expo
    return np.stack([np.sin(arg), np.cos(arg)], axis=-1).reshape(*t.shape, d)


@dataclass(frozen=True)
class MaskPlan:
    """Masking decisions aligned with one :class:`TokenBatch` layout.

    ``masked_keys[b, t, m]`` removes slot ``m`` of query ``(b, t)``.
    """

    masked_queries: np.ndarray  # (B, T) bool
    masked_keys: np.ndarray  # (B, T, M) bool
    ratio: float
    seed: int
    labels: np.ndarray | None = None  # (B, T, C) label vectors for label-aware queries

    @property
    def empty(self) -> bool:
        return not (self.masked_queries.any() or self.masked_keys.any())

    def to_json(self, nbr: np.ndarray) -> str:
        """Node-id lists plus seed, for debugging."""
        out = {"ratio": self.ratio, "seed": self.seed, "groups": []}
        for b in range(self.masked_queries.shape[0]):
            queries = np.flatnonzero(self.masked_queries[b]).tolist()
            keys = {
                str(t): sorted(int(k) for k in nbr[b, t][self.masked_keys[b, t]])
                for t in range(self.masked_keys.shape[1])
                if self.masked_keys[b, t].any()
            }
            out["groups"].append({"masked_queries": queries, "masked_keys": keys})
        return json.dumps(out, sort_keys=True)


def _keep_most_recent(masked_keys, nbr_mask, nbr_time):
    """Un-mask the latest key of any query that would otherwise lose every key."""
    keep = nbr_mask & ~masked_keys
    starved = nbr_mask.any(-1) & ~keep.any(-1)
    if starved.any():
        latest = np.argmax(np.where(nbr_mask, nbr_time, -np.inf), axis=-1)
        b, t = np.nonzero(starved)
        masked_keys = masked_keys.copy()
        masked_keys[b, t, latest[b, t]] = False
    return masked_keys


def sample_plan(
    batch: "TokenBatch",
    ratio: float,
    seed: int,
    labels: np.ndarray | None = None,
    valid: np.ndarray | None = None,
    tie_keys: bool = False,
) -> MaskPlan:
    """Draw masked queries among ``valid`` tokens and masked key slots.

    With ``tie_keys`` (sequence tasks) a masked token is also removed as a key for
    every query, and each group keeps at least one masked and one unmasked token.
    Otherwise key slots are drawn independently and a query never masks itself.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio}")
    nbr = batch.nbr.numpy()
    nbr_mask = batch.nbr_mask.numpy()
    B, T, M = nbr.shape
    valid = np.ones((B, T), bool) if valid is None else np.asarray(valid, bool)
    rng = np.random.default_rng(seed)
    queries = (rng.random((B, T)) < ratio) & valid
    if tie_keys:
        if ratio > 0:
            for b in range(B):
                idx = np.flatnonzero(valid[b])
                if len(idx) >= 2 and not queries[b].any():
                    queries[b, idx[rng.integers(len(idx))]] = True
                if len(idx) >= 2 and queries[b, idx].all():
                    queries[b, idx[rng.integers(len(idx))]] = False
        padded = np.concatenate([queries, np.zeros((B, 1), bool)], axis=1)
        keys = padded[np.arange(B)[:, None, None], nbr] & nbr_mask
    else:
        keys = (rng.random((B, T, M)) < ratio) & nbr_mask & (nbr != np.arange(T)[None, :, None])
        keys = _keep_most_recent(keys, nbr_mask, batch.nbr_time.numpy())
    return MaskPlan(queries, keys, float(ratio), int(seed), labels)


def plan_masks(
    g: "DynamicGraph",
    ratio: float,
    labels: np.ndarray | None,
    seed: int,
    t: float | None = None,
    assignment: np.ndarray | None = None,
) -> tuple[MaskPlan, "TokenBatch"]:
    """Plan over the node tokens of ``g`` observed strictly before ``t``.

    Returns the plan together with the token layout it is aligned to.
    """
    from .dyngraph import neighborhood_at
    from .encoder import tokens_from_histories

    if t is None:
        t = float(g.events.t[-1]) + 1.0 if len(g.events) else g.t0
    hists = [neighborhood_at(g, u, t, assignment) for u in range(g.n_nodes)]
    feats = g.features if g.features is not None else np.zeros((g.n_nodes, 0))
    batch = tokens_from_histories(feats, hists, np.full(g.n_nodes, t), g.t0)
    lab = None if labels is None else np.asarray(labels, np.float64).reshape(1, g.n_nodes, -1)
    return sample_plan(batch, ratio, seed, lab), batch


def masked_forward(
    plan: MaskPlan,
    encoder: "Encoder",
    batch: "TokenBatch",
    label_query: torch.nn.Module | None = None,
    x: torch.Tensor | None = None,
) -> tuple[torch.Tensor, list[dict]]:
    """Encoder pass with masked keys removed and masked queries replaced by
    ``label_query(labels)``. Returns embeddings for every token; callers pick
    the masked rows."""
    reduced = batch.drop_keys(torch.from_numpy(plan.masked_keys))
    override = override_mask = None
    if label_query is not None and plan.labels is not None and plan.masked_queries.any():
        override = label_query(torch.as_tensor(plan.labels, dtype=torch.float64))
        override_mask = torch.from_numpy(plan.masked_queries)
    return encoder(reduced, override, override_mask, x=x)


def special_token_inputs(x: torch.Tensor, masked: np.ndarray | torch.Tensor, token: torch.Tensor) -> torch.Tensor:
    """Baseline masking: masked tokens' inputs are replaced by one shared vector."""
    masked = torch.as_tensor(masked)
    return torch.where(masked[..., None], token.expand_as(x), x)
