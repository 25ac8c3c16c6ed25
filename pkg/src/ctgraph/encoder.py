"""Attention -> intensity -> attention layers producing time-conditioned node embeddings.

All tensors are float64. A forward pass works on a :class:`TokenBatch`: ``B``
independent groups of ``T`` query tokens, each with up to ``M`` key tokens drawn
from the same group. Link prediction uses one group per user sequence (tokens
are positions); node-level tasks use one group per graph snapshot (tokens are
nodes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .cam import temporal_encoding
from .dyngraph import History

DTYPE = torch.float64
TINY = torch.finfo(torch.float64).tiny
VARIANTS = ("SA", "GAT", "GATv2")
INIT_RATE_OFFSET = math.log(math.e - 1.0)  # softplus(x) == 1 at this x


@dataclass
class EncoderConfig:
    in_dim: int
    n_clusters: int
    dim: int = 32
    n_layers: int = 1
    n_heads: int = 1
    variant: str = "SA"
    negative_slope: float = 0.2
    intensity: bool = True
    temporal_encoding: bool = True

    def __post_init__(self):
        problems = []
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_layers < 1:
            problems.append("n_layers must be >= 1")
        if self.n_heads < 1 or self.dim % self.n_heads:
            problems.append(f"dim={self.dim} must be divisible by n_heads={self.n_heads}")
        if self.temporal_encoding and (self.dim // max(self.n_heads, 1)) % 2:
            problems.append("per-head dimension must be even when temporal encoding is on")
        if self.n_clusters < 1:
            problems.append("n_clusters must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def head_dim(self) -> int:
        return self.dim // self.n_heads


@dataclass
class TokenBatch:
    """Padded query/key layout for one forward pass.

    ``nbr`` holds key token indices within the group; padded slots hold ``T`` and
    resolve to an all-zero row, so they never read a real token's values.
    """

    x: Tensor  # (B, T, F_in) layer-0 inputs
    nbr: Tensor  # (B, T, M) long
    nbr_mask: Tensor  # (B, T, M) bool
    nbr_cluster: Tensor  # (B, T, M) long
    nbr_time: Tensor  # (B, T, M) time of latest event on the (query, key) pair
    time: Tensor  # (B, T) query time
    elapsed: Tensor  # (B, T) query time minus previous event time

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.nbr.shape)

    def select(self, rows) -> "TokenBatch":
        return TokenBatch(*(getattr(self, f)[rows] for f in _FIELDS))

    def drop_keys(self, removed: Tensor) -> "TokenBatch":
        """Remove keys flagged in ``removed`` (B, T, M) and re-pack the survivors."""
        keep = self.nbr_mask & ~removed
        order = torch.argsort((~keep).to(torch.int8), dim=-1, stable=True)
        width = max(int(keep.sum(-1).max()) if keep.numel() else 0, 1)
        order = order[..., :width]
        mask = torch.gather(keep, -1, order)
        pad = self.nbr.shape[1]
        nbr = torch.where(mask, torch.gather(self.nbr, -1, order), torch.full_like(order, pad))
        return TokenBatch(
            self.x,
            nbr,
            mask,
            torch.where(mask, torch.gather(self.nbr_cluster, -1, order), torch.zeros_like(order)),
            torch.where(mask, torch.gather(self.nbr_time, -1, order), torch.zeros(mask.shape, dtype=DTYPE)),
            self.time,
            self.elapsed,
        )


_FIELDS = ("x", "nbr", "nbr_mask", "nbr_cluster", "nbr_time", "time", "elapsed")


def encode_input(x_f, x_c) -> Tensor:
    """Layer-0 node representation: features concatenated with one-hot cluster codes."""
    x_f = torch.as_tensor(np.array(x_f, dtype=np.float64))
    x_c = torch.as_tensor(np.array(x_c, dtype=np.float64))
    if x_f.ndim != 2 or x_c.ndim != 2 or x_f.shape[0] != x_c.shape[0]:
        raise ValueError(f"shape mismatch: features {tuple(x_f.shape)} vs clusters {tuple(x_c.shape)}")
    return torch.cat([x_f, x_c], dim=1)


def tokens_from_histories(
    h0: Tensor,
    histories: Sequence[History],
    query_time: Sequence[float] | np.ndarray,
    time_origin: float = 0.0,
    time_scale: float = 1.0,
) -> TokenBatch:
    """One group whose tokens are graph nodes; token ``u`` attends over ``histories[u]``.

    Times are mapped to model units as ``(t - time_origin) / time_scale``.
    """
    n = len(histories)
    width = max([len(h) for h in histories] + [1])
    nbr = np.full((n, width), n, np.int64)
    mask = np.zeros((n, width), bool)
    clus = np.zeros((n, width), np.int64)
    etime = np.zeros((n, width))
    for u, hist in enumerate(histories):
        m = len(hist)
        nbr[u, :m] = hist.neighbors
        mask[u, :m] = True
        clus[u, :m] = hist.clusters
        etime[u, :m] = (hist.times - time_origin) / time_scale
    qt = np.asarray(query_time, np.float64)
    tbar = np.array([h.t_bar for h in histories])
    if np.any(qt < tbar):
        bad = int(np.argmax(qt < tbar))
        raise ValueError(f"query time {qt[bad]} precedes previous event {tbar[bad]} of node {bad}")
    return TokenBatch(
        (h0.detach().to(DTYPE) if isinstance(h0, Tensor) else torch.from_numpy(np.array(h0, dtype=np.float64)))[None],
        torch.from_numpy(nbr)[None],
        torch.from_numpy(mask)[None],
        torch.from_numpy(clus)[None],
        torch.from_numpy(etime)[None],
        torch.from_numpy((qt - time_origin) / time_scale)[None],
        torch.from_numpy((qt - tbar) / time_scale)[None],
    )


# ---------------------------------------------------------------------------
# functional pieces


def scaled_softplus(x: Tensor, phi: Tensor) -> Tensor:
    """``phi * log(1 + exp(x / phi))`` in the overflow-free logaddexp form.

    Floored at the smallest normal double so deep negative inputs stay positive.
    """
    z = x / phi
    return (phi * torch.logaddexp(z, torch.zeros_like(z))).clamp_min(TINY)


def attention_scores(
    variant: str,
    query: Tensor,
    keys: Tensor,
    a: Tensor | None = None,
    negative_slope: float = 0.2,
) -> Tensor:
    """Raw scores e_{u,i}.

    ``query`` is (..., H, d) and ``keys`` (..., M, H, d); returns (..., M, H).
    SA uses the query projection, GAT/GATv2 the key projection of the query node.
    ``a`` is (H, 2d) for the GAT variants.
    """
    d = query.shape[-1]
    q = query.unsqueeze(-3)
    if variant == "SA":
        return (q * keys).sum(-1) / math.sqrt(d)
    a_self, a_nbr = a[..., :d], a[..., d:]
    if variant == "GAT":
        return F.leaky_relu((q * a_self).sum(-1) + (keys * a_nbr).sum(-1), negative_slope)
    if variant == "GATv2":
        return (F.leaky_relu(q, negative_slope) * a_self).sum(-1) + (F.leaky_relu(keys, negative_slope) * a_nbr).sum(-1)
    raise ValueError(f"unknown attention variant {variant!r}")


def masked_softmax(scores: Tensor, mask: Tensor) -> tuple[Tensor, Tensor]:
    """Softmax over the key axis (-2) restricted to ``mask`` (..., M).

    Returns weights (..., M, H) and a flag (...) for rows without any key; those
    rows get all-zero weights.
    """
    m = mask.unsqueeze(-1)
    empty = ~mask.any(-1)
    s = scores.masked_fill(~m, float("-inf")).masked_fill(empty[..., None, None], 0.0)
    w = torch.softmax(s, dim=-2) * m
    return w, empty


def conditional_intensity_heads(
    s: Tensor,
    elapsed: Tensor,
    W_G: Tensor,
    b_G: Tensor,
    w: Tensor,
    mu: Tensor,
    log_phi: Tensor,
    negative_slope: float = 0.2,
) -> Tensor:
    """Per-cluster intensities for every head.

    ``s`` is (..., H, d) and ``elapsed`` broadcasts against (..., H); parameters
    carry leading (H, K). Returns (..., H, K).
    """
    endo = torch.einsum("...hd,hked->...hke", s, W_G)
    exo = b_G * elapsed[..., None, None]
    g = F.leaky_relu(endo + exo, negative_slope)
    x = (g * w).sum(-1) + mu
    return scaled_softplus(x, torch.exp(log_phi))


def conditional_intensity(
    s_u: Tensor,
    t: float,
    t_bar: float,
    W_G: Tensor,
    b_G: Tensor,
    w: Tensor,
    mu: Tensor,
    phi: Tensor,
    negative_slope: float = 0.2,
) -> Tensor:
    """Single-head K-vector of intensities for one query at time ``t``.

    ``W_G`` is (K, d, d), ``b_G`` and ``w`` are (K, d), ``mu`` and ``phi`` are (K,).
    """
    if t < t_bar:
        raise ValueError(f"query time {t} precedes previous event time {t_bar}")
    phi = torch.as_tensor(phi, dtype=DTYPE)
    if torch.any(phi <= 0):
        raise ValueError("timescale phi must be positive")
    lam = conditional_intensity_heads(
        torch.as_tensor(s_u, dtype=DTYPE)[None],
        torch.tensor([float(t - t_bar)], dtype=DTYPE),
        torch.as_tensor(W_G, dtype=DTYPE)[None],
        torch.as_tensor(b_G, dtype=DTYPE)[None],
        torch.as_tensor(w, dtype=DTYPE)[None],
        torch.as_tensor(mu, dtype=DTYPE)[None],
        torch.log(phi)[None],
        negative_slope,
    )
    return lam[0]


def endogenous_encode(scores: Tensor, values: Tensor, mask: Tensor | None = None) -> tuple[Tensor, bool]:
    """Softmax-weighted sum of neighbor values for one single-head query.

    ``scores`` (M,), ``values`` (M, d). Returns (s_u, is_empty).
    """
    scores = torch.as_tensor(scores, dtype=DTYPE)
    values = torch.as_tensor(values, dtype=DTYPE)
    mask = torch.ones(scores.shape, dtype=torch.bool) if mask is None else torch.as_tensor(mask)
    w, empty = masked_softmax(scores[:, None], mask)
    return (w * values).sum(0), bool(empty)


# ---------------------------------------------------------------------------
# modules


def _init(gen: torch.Generator, *shape: int, fan_in: int, scale: float = 1.0) -> nn.Parameter:
    return nn.Parameter(torch.randn(*shape, generator=gen, dtype=DTYPE) * (scale / math.sqrt(max(fan_in, 1))))


class IntensityAttentionLayer(nn.Module):
    """One encoder layer with its own value, scoring and per-cluster intensity parameters."""

    def __init__(self, in_dim: int, cfg: EncoderConfig, gen: torch.Generator):
        super().__init__()
        H, d, K = cfg.n_heads, cfg.head_dim, cfg.n_clusters
        self.cfg = cfg
        self.in_dim = in_dim
        self.W_V = _init(gen, H, d, in_dim, fan_in=in_dim)
        self.W_K = _init(gen, H, d, in_dim, fan_in=in_dim)
        if cfg.variant == "SA":
            self.W_Q = _init(gen, H, d, in_dim, fan_in=in_dim)
        else:
            self.a = _init(gen, H, 2 * d, fan_in=2 * d)
        self.W_G = _init(gen, H, K, d, d, fan_in=d, scale=0.5)
        self.b_G = _init(gen, H, K, d, fan_in=1, scale=0.1)
        self.w = _init(gen, H, K, d, fan_in=d, scale=0.5)
        self.mu = nn.Parameter(torch.full((H, K), INIT_RATE_OFFSET, dtype=DTYPE))
        self.log_phi = nn.Parameter(torch.zeros(H, K, dtype=DTYPE))

    def _proj(self, h: Tensor, W: Tensor) -> Tensor:
        return torch.einsum("...i,hdi->...hd", h, W)

    def intensity(self, s: Tensor, elapsed: Tensor) -> Tensor:
        """(..., H, d) endogenous state and elapsed time broadcasting to (..., H) -> (..., H, K)."""
        return conditional_intensity_heads(
            s, elapsed, self.W_G, self.b_G, self.w, self.mu, self.log_phi, self.cfg.negative_slope
        )

    def forward(
        self,
        h: Tensor,
        batch: TokenBatch,
        query_override: Tensor | None = None,
        override_mask: Tensor | None = None,
        te_query: Tensor | None = None,
        te_key: Tensor | None = None,
        unit_intensity: bool = False,
    ) -> tuple[Tensor, dict]:
        B, T, M = batch.nbr.shape
        H, d = self.cfg.n_heads, self.cfg.head_dim
        hp = torch.cat([h, torch.zeros(B, 1, h.shape[-1], dtype=DTYPE)], dim=1)
        bidx = torch.arange(B)[:, None, None]
        values = self._proj(hp, self.W_V)[bidx, batch.nbr]  # (B, T, M, H, d)
        keys = self._proj(hp, self.W_K)[bidx, batch.nbr]
        query = self._proj(h, self.W_Q if self.cfg.variant == "SA" else self.W_K)  # (B, T, H, d)
        if query_override is not None:
            query = torch.where(override_mask[..., None, None], query_override, query)
        if te_query is not None:
            query = query + te_query
            keys = keys + te_key
        scores = attention_scores(self.cfg.variant, query, keys, getattr(self, "a", None), self.cfg.negative_slope)
        alpha, empty = masked_softmax(scores, batch.nbr_mask)  # (B, T, M, H)
        s = torch.einsum("btmh,btmhd->bthd", alpha, values)
        if unit_intensity or not self.cfg.intensity:
            lam = torch.ones(B, T, H, self.cfg.n_clusters, dtype=DTYPE)
        else:
            lam = self.intensity(s, batch.elapsed[..., None])
        lam_nbr = torch.gather(lam, 3, batch.nbr_cluster[:, :, None, :].expand(B, T, H, M)).permute(0, 1, 3, 2)
        out = torch.einsum("btmh,btmhd->bthd", alpha * lam_nbr, values)
        aux = {"alpha": alpha, "s": s, "lam": lam, "empty": empty, "keys_read": batch.nbr[batch.nbr_mask]}
        return out.reshape(B, T, H * d), aux


class Encoder(nn.Module):
    """Stack of :class:`IntensityAttentionLayer` with per-layer parameters."""

    def __init__(self, cfg: EncoderConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(int(seed))
        dims = [cfg.in_dim] + [cfg.dim] * cfg.n_layers
        self.layers = nn.ModuleList(IntensityAttentionLayer(dims[i], cfg, gen) for i in range(cfg.n_layers))

    def _split(self, x: Tensor) -> Tensor:
        return x.reshape(*x.shape[:-1], self.cfg.n_heads, self.cfg.head_dim)

    def forward(
        self,
        batch: TokenBatch,
        query_override: Tensor | None = None,
        override_mask: Tensor | None = None,
        unit_intensity: bool = False,
        x: Tensor | None = None,
    ) -> tuple[Tensor, list[dict]]:
        """Run all layers. ``query_override`` (B, T, dim) replaces the first layer's
        query vectors where ``override_mask`` is set (label-aware masked queries)."""
        te_q = te_k = None
        if self.cfg.temporal_encoding:
            te_q = self._split(temporal_encoding(batch.time, self.cfg.dim))
            te_k = self._split(temporal_encoding(batch.nbr_time, self.cfg.dim))
        h = batch.x if x is None else x
        auxes = []
        for i, layer in enumerate(self.layers):
            ov = self._split(query_override) if (i == 0 and query_override is not None) else None
            h, aux = layer(h, batch, ov, override_mask, te_q, te_k, unit_intensity)
            auxes.append(aux)
        return h, auxes

    @property
    def last(self) -> IntensityAttentionLayer:
        return self.layers[-1]
