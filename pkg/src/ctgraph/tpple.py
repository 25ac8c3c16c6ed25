"""Point-process log-likelihood of observed edge events and its integral estimators.

An :class:`IntensityPath` describes one (or a batch of) event sequences together
with an evaluator for the per-cluster intensities. Interval ``i`` (1-based)
spans ``[t_{i-1}, t_i]``; interval ``n + 1`` is the open future after the last
event. The evaluator receives both the query times and the interval each query
falls in, so it can condition on the history available inside that interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
from torch import Tensor

Evaluator = Callable[[Tensor, Tensor], Tensor]
INTEGRATORS = ("trapezoid", "mc")
DEFAULT_MC_SAMPLES = 5


@dataclass(frozen=True)
class IntensityPath:
    evaluator: Evaluator  # (times (..., m), interval (..., m)) -> (..., m, K)
    times: Tensor  # (..., n + 1): t_0 then the n event times
    types: Tensor  # (..., n) cluster of each event
    valid: Tensor | None = None  # (..., n); padded events repeat the last time

    @classmethod
    def from_function(cls, fn: Callable[[Tensor], Tensor], event_times, types, t0: float | None = None) -> "IntensityPath":
        """Path for an intensity that depends on time only; ``fn`` maps (..., m) -> (..., m, K)."""
        ev = torch.as_tensor(np.asarray(event_times, np.float64))
        t0 = ev[..., :1] if t0 is None else torch.full_like(ev[..., :1], float(t0))
        return cls(lambda t, _i: fn(t), torch.cat([t0, ev], dim=-1), torch.as_tensor(np.asarray(types, np.int64)))

    @property
    def n_events(self) -> int:
        return self.types.shape[-1]

    def _valid(self) -> Tensor:
        return torch.ones(self.types.shape, dtype=torch.bool) if self.valid is None else self.valid

    def _intervals(self, like: Tensor) -> Tensor:
        n = self.n_events
        shape = (*like.shape[:-1], n) if like.ndim else (n,)
        return torch.arange(1, n + 1).expand(shape)


def _check_finite(lam: Tensor, times: Tensor) -> None:
    bad = ~torch.isfinite(lam).all(-1)
    if bad.any():
        raise FloatingPointError(f"non-finite intensity at t={float(times[bad][0])}")


def integral_trapezoid(p: IntensityPath, refine: int = 1) -> Tensor:
    """Composite trapezoid over each inter-event interval, ``refine`` panels per interval."""
    left, right = p.times[..., :-1], p.times[..., 1:]
    frac = torch.linspace(0.0, 1.0, refine + 1, dtype=torch.float64)
    knots = left[..., None] + (right - left)[..., None] * frac  # (..., n, refine+1)
    ids = p._intervals(left)[..., None].expand(knots.shape)
    lam = p.evaluator(knots.flatten(-2), ids.flatten(-2)).sum(-1).unflatten(-1, knots.shape[-2:])
    panel = (right - left)[..., None] / refine
    per_interval = (panel * (lam[..., 1:] + lam[..., :-1]) / 2).sum(-1)
    return (per_interval * p._valid()).sum(-1)


def integral_mc(p: IntensityPath, L: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Tensor:
    """Unbiased estimate with ``L`` uniform draws per interval; deterministic given ``seed``."""
    if L < 1:
        raise ValueError("need at least one sample per interval")
    left, right = p.times[..., :-1], p.times[..., 1:]
    u = torch.from_numpy(np.random.default_rng(seed).random((*left.shape, L)))
    s = left[..., None] + (right - left)[..., None] * u
    ids = p._intervals(left)[..., None].expand(s.shape)
    lam = p.evaluator(s.flatten(-2), ids.flatten(-2)).sum(-1).unflatten(-1, s.shape[-2:])
    return ((right - left) * lam.mean(-1) * p._valid()).sum(-1)


def integral(p: IntensityPath, integrator: str = "trapezoid", L: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> Tensor:
    if integrator == "trapezoid":
        return integral_trapezoid(p)
    if integrator == "mc":
        return integral_mc(p, L, seed)
    raise ValueError(f"integrator must be one of {INTEGRATORS}, got {integrator!r}")


def event_log_intensity(p: IntensityPath) -> Tensor:
    """Sum over observed events of log lambda_{k_i}(t_i)."""
    ev = p.times[..., 1:]
    lam = p.evaluator(ev, p._intervals(ev))
    _check_finite(lam, ev)
    own = torch.gather(lam, -1, p.types[..., None])[..., 0]
    valid = p._valid()
    return torch.where(valid, torch.log(torch.where(valid, own, torch.ones_like(own))), torch.zeros_like(own)).sum(-1)


def tpp_log_likelihood(
    p: IntensityPath, integrator: str = "trapezoid", L: int = DEFAULT_MC_SAMPLES, seed: int = 0
) -> Tensor:
    """Observed-event log-intensities minus the integrated total intensity on [t_0, t_n]."""
    if p.n_events < 1:
        raise ValueError("log-likelihood needs at least one event")
    return event_log_intensity(p) - integral(p, integrator, L, seed)


def interevent_density(
    p: IntensityPath,
    k: int,
    t,
    integrator: str = "trapezoid",
    n_sub: int = 64,
    L: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> Tensor:
    """Density of the next event being of cluster ``k`` at ``t >= t_n``.

    The survival integral over [t_n, t] uses ``n_sub`` panels (trapezoid) or
    ``n_sub * L`` uniform draws (mc).
    """
    t_n = p.times[..., -1]
    t = torch.as_tensor(t, dtype=torch.float64)
    if torch.any(t < t_n):
        raise ValueError("density is only defined after the last event")
    t, t_n = torch.broadcast_tensors(t, t_n)
    future = torch.full((*t.shape, 1), p.n_events + 1)
    span = (t - t_n)[..., None]
    if integrator == "trapezoid":
        knots = t_n[..., None] + span * torch.linspace(0.0, 1.0, n_sub + 1, dtype=torch.float64)
        lam = p.evaluator(knots, future.expand(knots.shape)).sum(-1)
        survival = (span / n_sub * (lam[..., 1:] + lam[..., :-1]) / 2).sum(-1)
    elif integrator == "mc":
        u = torch.from_numpy(np.random.default_rng(seed).random((*t.shape, n_sub * L)))
        s = t_n[..., None] + span * u
        survival = span[..., 0] * p.evaluator(s, future.expand(s.shape)).sum(-1).mean(-1)
    else:
        raise ValueError(f"integrator must be one of {INTEGRATORS}, got {integrator!r}")
    lam_k = p.evaluator(t[..., None], future)[..., 0, k]
    return lam_k * torch.exp(-survival)
