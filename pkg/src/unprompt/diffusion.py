"""Noise schedule, forward noising, the epsilon-prediction training step and
deterministic DDIM sampling."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import denoiser as dn
from .errors import DimensionMismatch, TimestepOutOfRange
from .schedule import NoiseSchedule, make_schedule  # noqa: F401

def _check_t(t, sched: NoiseSchedule) -> np.ndarray:
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > sched.T):
        raise TimestepOutOfRange(f"t must lie in [1, {sched.T}]")
    return t


def _col(a: np.ndarray, like: np.ndarray) -> np.ndarray:
    # per-row coefficients broadcast against (B, d) samples
    return a[:, None] if a.ndim == 1 and like.ndim == 2 else a


def forward_noise(x0, t, eps, sched: NoiseSchedule) -> np.ndarray:
    """``x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps``; ``t`` may be a
    scalar or one timestep per row."""
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise DimensionMismatch(f"x0 {x0.shape} vs eps {eps.shape}")
    ab = sched.abar(_check_t(t, sched))
    return _col(np.sqrt(ab), x0) * x0 + _col(np.sqrt(1.0 - ab), x0) * eps


def recover_noise(x_t, x0, t, sched: NoiseSchedule) -> np.ndarray:
    """Invert the forward process for the noise: ``(x_t - sqrt(abar) x0) / sqrt(1 - abar)``."""
    x_t = np.asarray(x_t, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != x_t.shape:
        raise DimensionMismatch(f"x_t {x_t.shape} vs x0 {x0.shape}")
    ab = sched.abar(_check_t(t, sched))
    return (x_t - _col(np.sqrt(ab), x0) * x0) / _col(np.sqrt(1.0 - ab), x0)


LossGrad = Callable[..., tuple[float, np.ndarray]]


def train_step(
    params: dn.DenoiserParams,
    batch,
    sched: NoiseSchedule,
    rng: np.random.Generator,
    loss_grad: LossGrad = dn.loss_and_grad,
) -> tuple[float, np.ndarray]:
    """Mean ``||eps - eps_theta(x_t, t)||^2`` over the batch with one
    ``t ~ U{1..T}`` and ``eps ~ N(0, I)`` per item; returns ``(loss, grad)``."""
    x0 = np.atleast_2d(np.asarray(batch, dtype=float))
    if x0.shape[0] == 0:
        raise ValueError("empty batch")
    t = rng.integers(1, sched.T + 1, size=x0.shape[0])
    eps = rng.standard_normal(x0.shape)
    x_t = forward_noise(x0, t, eps, sched)
    return loss_grad(params, x_t, t, eps)


def timestep_grid(t_start: int, steps: int) -> np.ndarray:
    """Descending integer grid from ``t_start`` to 0 with ``steps`` updates."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    steps = min(steps, t_start)
    return np.unique(np.round(np.linspace(0, t_start, steps + 1)).astype(int))[::-1]


def ddim_sample(
    params: dn.DenoiserParams,
    xT,
    sched: NoiseSchedule,
    steps: int | None = None,
    t_start: int | None = None,
    predict: Callable | None = None,
    clip: tuple[float, float] | None = None,
) -> np.ndarray:
    """Deterministic DDIM from ``x_{t_start}`` (default ``T``) down to ``x_0``.

    Each update forms ``x0_hat = (x_t - sqrt(1-abar_t) eps) / sqrt(abar_t)``
    and re-noises it to the next grid time with the same predicted ``eps``.
    ``clip`` bounds ``x0_hat`` to a data range; the re-noising then uses the
    noise implied by the clipped estimate.
    """
    t_start = sched.T if t_start is None else int(t_start)
    if not 1 <= t_start <= sched.T:
        raise TimestepOutOfRange(f"t_start must lie in [1, {sched.T}]")
    predict = predict or dn.predict_noise
    grid = timestep_grid(t_start, steps or t_start)
    x = np.array(xT, dtype=float)
    for t, t_prev in zip(grid[:-1], grid[1:]):
        eps = predict(params, x, int(t))
        ab, ab_prev = sched.alpha_bar[t - 1], sched.abar(t_prev)
        x0_hat = (x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
        if clip is not None:
            x0_hat = np.clip(x0_hat, *clip)
            eps = (x - np.sqrt(ab) * x0_hat) / np.sqrt(1.0 - ab)
        x = np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps
    return x


def cosine_lr(step: int, total: int, peak: float, warmup: int = 200) -> float:
    """Linear warmup then cosine decay to zero."""
    warm = min(1.0, (step + 1) / max(warmup, 1))
    return peak * warm * 0.5 * (1.0 + np.cos(np.pi * step / max(total, 1)))


def pretrain(
    params: dn.DenoiserParams,
    data: np.ndarray,
    sched: NoiseSchedule,
    steps: int,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
    warmup: int = 200,
    on_step: Callable[[int, float], None] | None = None,
) -> dn.DenoiserParams:
    """Adam on the epsilon-prediction loss with a warmup/cosine learning rate."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    p = params
    for k in range(steps):
        idx = rng.integers(0, data.shape[0], size=batch_size)
        loss, g = train_step(p, data[idx], sched, rng)
        p = dn.adam_update(p, g, cosine_lr(k, steps, lr, warmup))
        if on_step:
            on_step(k, loss)
    return p
