"""Encoder plus task head, the combined objective, and checkpoint files."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .. import tensorio
from ..cam import MaskPlan, masked_forward, special_token_inputs
from ..encoder import DTYPE, Encoder, EncoderConfig, TokenBatch
from ..tpple import IntensityPath, tpp_log_likelihood

KINDS = ("link", "node", "traffic")
MASKINGS = ("cam", "special", "none")


@dataclass
class TaskSpec:
    kind: str
    n_outputs: int
    gamma: float = 0.1
    label_dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"task kind must be one of {KINDS}, got {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.kind == "traffic" and self.n_outputs != 1:
            raise ValueError("traffic head has exactly one output")


class TaskModel(nn.Module):
    """Encoder, label-aware query map ``q(y) = W y``, shared mask token and output head."""

    def __init__(self, enc: EncoderConfig, task: TaskSpec, seed: int = 0):
        super().__init__()
        self.enc_cfg = enc
        self.task = task
        self.encoder = Encoder(enc, seed)
        gen = torch.Generator().manual_seed(int(seed) + 7919)
        self.W_label = nn.Parameter(torch.randn(enc.dim, task.label_dim, generator=gen, dtype=DTYPE) / math.sqrt(task.label_dim))
        self.mask_token = nn.Parameter(torch.randn(enc.in_dim, generator=gen, dtype=DTYPE) * 0.1)
        self.W_O = nn.Parameter(torch.randn(enc.dim, task.n_outputs, generator=gen, dtype=DTYPE) / math.sqrt(enc.dim))
        self.b_O = nn.Parameter(torch.zeros(task.n_outputs, dtype=DTYPE))

    def label_query(self, y: Tensor) -> Tensor:
        return y @ self.W_label.T

    def embed(self, batch: TokenBatch, plan: MaskPlan | None = None, masking: str = "cam") -> tuple[Tensor, list[dict]]:
        if plan is None or masking == "none":
            return self.encoder(batch)
        if masking == "cam":
            return masked_forward(plan, self.encoder, batch, self.label_query)
        if masking == "special":
            return self.encoder(batch, x=special_token_inputs(batch.x, plan.masked_queries, self.mask_token))
        raise ValueError(f"masking must be one of {MASKINGS}, got {masking!r}")

    def head(self, h: Tensor) -> Tensor:
        out = h @ self.W_O + self.b_O
        return out[..., 0] if self.task.kind == "traffic" else out


def task_loss(kind: str, outputs: Tensor, labels: Tensor, weights: Tensor) -> Tensor:
    """Task-aware loss over the positions flagged in ``weights`` (B, T).

    link: cross-entropy at masked positions, averaged per sequence then over
    sequences that have any; node: cross-entropy; traffic: squared error.
    """
    weights = torch.as_tensor(weights, dtype=torch.bool)
    if labels.shape != weights.shape:
        raise ValueError(f"labels {tuple(labels.shape)} do not match positions {tuple(weights.shape)}")
    if not weights.any():
        return outputs.sum() * 0.0
    if kind == "traffic":
        return ((outputs - labels)[weights] ** 2).mean()
    safe = torch.where(weights, labels, torch.zeros_like(labels)).long()
    nll = -torch.gather(F.log_softmax(outputs, dim=-1), -1, safe[..., None])[..., 0]
    if kind == "node":
        return nll[weights].mean()
    if kind == "link":
        w = weights.to(DTYPE)
        count = w.sum(-1)
        has = count > 0
        per_seq = (nll * w).sum(-1)[has] / count[has]
        return per_seq.mean()
    raise ValueError(f"unknown task kind {kind!r}")


def total_objective(loss: Tensor, tpple: Tensor | None, gamma: float) -> Tensor:
    """Task loss minus ``gamma`` times the mean log-likelihood regularizer."""
    if gamma == 0 or tpple is None or tpple.numel() == 0:
        return loss
    return loss - gamma * tpple.mean()


def sequence_path(layer, states: Tensor, times: Tensor, types: Tensor, valid: Tensor) -> IntensityPath:
    """Per-head intensity path whose interval ``i`` uses ``states[:, i - 1]``.

    ``states`` is (P, E, H, d); ``times`` (P, E + 1); ``types``/``valid`` (P, E).
    The returned path has batch shape (P, H).
    """
    P, E, H, d = states.shape
    st = states.permute(0, 2, 1, 3)
    times_h = times[:, None, :].expand(P, H, E + 1)

    def evaluate(tq: Tensor, iv: Tensor) -> Tensor:
        m = tq.shape[-1]
        idx = (iv - 1).clamp(max=E - 1)
        s = torch.gather(st, 2, idx[..., None].expand(P, H, m, d))
        elapsed = tq - torch.gather(times_h, 2, (iv - 1).clamp(max=E))
        lam = layer.intensity(s.permute(0, 2, 1, 3), elapsed.permute(0, 2, 1))  # (P, m, H, K)
        return lam.permute(0, 2, 1, 3)

    return IntensityPath(evaluate, times_h, types[:, None, :].expand(P, H, E), valid[:, None, :].expand(P, H, E))


def path_likelihood(layer, states, times, types, valid, integrator="trapezoid", L=5, seed=0) -> Tensor:
    """Head-averaged log-likelihood per path, (P,)."""
    if states.shape[0] == 0:
        return torch.zeros(0, dtype=DTYPE)
    path = sequence_path(layer, states, times, types, valid)
    return tpp_log_likelihood(path, integrator, L, seed).mean(-1)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, model: TaskModel, extra: dict | None = None, arrays: dict | None = None) -> None:
    tensors = {f"param/{k}": v for k, v in model.state_dict().items()}
    tensors.update({f"data/{k}": v for k, v in (arrays or {}).items()})
    meta = {"encoder": asdict(model.enc_cfg), "task": asdict(model.task), "extra": extra or {}}
    tensorio.save(path, tensors, meta)


def load_checkpoint(path: str | Path) -> tuple[TaskModel, dict, dict[str, np.ndarray]]:
    tensors, meta = tensorio.load(path)
    model = TaskModel(EncoderConfig(**meta["encoder"]), TaskSpec(**meta["task"]))
    params = {k[len("param/"):]: torch.from_numpy(v) for k, v in tensors.items() if k.startswith("param/")}
    model.load_state_dict(params)
    arrays = {k[len("data/"):]: v for k, v in tensors.items() if k.startswith("data/")}
    return model, meta["extra"], arrays
