"""Minibatch training with stepped learning-rate decay and validation-based selection."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .model import MASKINGS, TaskModel

logger = logging.getLogger(__name__)

INTEGRATORS = ("trapezoid", "mc")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    mask_ratio: float = 0.2
    integrator: str = "trapezoid"
    mc_samples: int = 5
    patience: int = 10
    decay_every: int = 10
    decay: float = 0.9
    masking: str = "cam"
    weight_decay: float = 0.0

    def __post_init__(self):
        problems = []
        if not self.lr > 0:
            problems.append("lr must be positive")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.patience < 1:
            problems.append("patience must be >= 1")
        if not 0 <= self.mask_ratio < 1:
            problems.append("mask_ratio must lie in [0, 1)")
        if self.integrator not in INTEGRATORS:
            problems.append(f"integrator must be one of {INTEGRATORS}")
        if self.masking not in MASKINGS:
            problems.append(f"masking must be one of {MASKINGS}")
        if self.mc_samples < 1:
            problems.append("mc_samples must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.decay ** (epoch // self.decay_every)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_metric: float


@dataclass
class TrainResult:
    model: TaskModel
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1  # -1 means the initialization was never beaten
    best_val: float = math.nan
    initial_val: float = math.nan


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, checkpoint: TaskModel):
        super().__init__(message)
        self.checkpoint = checkpoint


def write_epoch_log(path: str | Path, log: list[EpochRecord]) -> None:
    lines = ["epoch,lr,train_loss,val_metric"]
    lines += [f"{r.epoch},{r.lr!r},{r.train_loss!r},{r.val_metric!r}" for r in log]
    Path(path).write_text("\n".join(lines) + "\n")


def _better(a: float, b: float, higher: bool) -> bool:
    # without a validation split (nan) the latest state always wins
    if math.isnan(a) or math.isnan(b):
        return True
    return a > b if higher else a < b


def train(model: TaskModel, task, cfg: TrainConfig) -> TrainResult:
    """Adam on the combined objective, lr multiplied by ``decay`` every ``decay_every`` epochs.

    Returns the model state with the best validation metric seen, counting the
    initialization as a candidate, so selection never ends below the starting point.
    """
    torch.set_num_threads(1)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=cfg.weight_decay)
    sched = torch.optim.lr_scheduler.StepLR(opt, step_size=cfg.decay_every, gamma=cfg.decay)
    higher = task.higher_is_better
    best_val = task.validate(model, cfg.masking)
    result = TrainResult(model, initial_val=best_val, best_val=best_val)
    best_state = copy.deepcopy(model.state_dict())
    last_finite = copy.deepcopy(model.state_dict())
    since = 0
    seeds = np.random.SeedSequence([cfg.seed, 0x7A1E])
    for epoch in range(cfg.epochs):
        rng = np.random.default_rng(seeds.spawn(1)[0])
        lr = opt.param_groups[0]["lr"]
        order = rng.permutation(task.n_train)
        total, count = 0.0, 0
        model.train()
        for a in range(0, len(order), cfg.batch_size):
            rows = np.sort(order[a : a + cfg.batch_size])
            step_seed = int(rng.integers(2**31))
            opt.zero_grad()
            obj, _, _ = task.objective(model, rows, cfg, step_seed)
            if not torch.isfinite(obj):
                model.load_state_dict(last_finite)
                raise TrainingDiverged(f"non-finite objective at epoch {epoch}, batch starting {a}", model)
            obj.backward()
            opt.step()
            last_finite = copy.deepcopy(model.state_dict())
            total += float(obj.detach()) * len(rows)
            count += len(rows)
        sched.step()
        model.eval()
        val = task.validate(model, cfg.masking)
        result.log.append(EpochRecord(epoch, lr, total / max(count, 1), val))
        logger.info("epoch %d lr %.3g loss %.6f val %.6f", epoch, lr, total / max(count, 1), val)
        if _better(val, best_val, higher):
            best_val, result.best_epoch, since = val, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            since += 1
            if since >= cfg.patience:
                break
    model.load_state_dict(best_state)
    result.best_val = best_val
    return result
