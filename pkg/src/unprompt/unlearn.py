"""Surrogate-based instance unlearning with timestep-aware weighting and
gradient surgery.

One iteration draws a remember batch, a single timestep ``t`` and a single
noise draw ``eps`` that is shared by the remember and forget branches.  The
forget branch regresses onto the *modified* noise that would have produced
the forget sample's noisy state from the surrogate, so the model learns to
denoise the target towards the surrogate while the remember branch keeps
the ordinary objective on the remember set.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import denoiser as dn
from .diffusion import forward_noise, recover_noise
from .errors import DimensionMismatch, NonFiniteGradient, NumericalFailure
from .rng import Streams
from .schedule import NoiseSchedule

log = logging.getLogger(__name__)

SURGERY_MODES = ("none", "project_gf", "project_both")
DEGENERATE_NORM = 1e-12
LR_SCHEDULES = ("constant", "cosine")


@dataclass
class UnlearnTask:
    forget_set: np.ndarray  # (k, d)
    remember_set: np.ndarray  # (n, d)
    surrogates: np.ndarray  # (k, d); row j is the surrogate of forget row j
    schedule: NoiseSchedule
    iters: int = 240
    lr: float = 1e-4
    beta: float = 5e-5  # per unit of the reference timestep scale
    batch_size: int = 8
    t_ref: int = 1000
    clamp: bool = True
    surgery: str = "project_gf"
    constant_lambda: float | None = None
    reset_moments: bool = False
    lr_schedule: str = "constant"  # or "cosine": decay to zero within each target
    snapshot_every: int = 40
    seed: int = 0

    def __post_init__(self):
        self.forget_set = np.atleast_2d(np.asarray(self.forget_set, dtype=float))
        self.remember_set = np.atleast_2d(np.asarray(self.remember_set, dtype=float))
        self.surrogates = np.atleast_2d(np.asarray(self.surrogates, dtype=float))
        self.validate()

    def validate(self) -> None:
        if self.surrogates.shape != self.forget_set.shape:
            raise DimensionMismatch("every forget sample needs exactly one surrogate of the same shape")
        if self.remember_set.shape[0] == 0:
            raise ValueError("remember set is empty")
        if self.remember_set.shape[1] != self.forget_set.shape[1]:
            raise DimensionMismatch("remember and forget samples differ in dimension")
        if self.surgery not in SURGERY_MODES:
            raise ValueError(f"surgery must be one of {SURGERY_MODES}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not self.clamp and self.beta * self.t_ref >= 1:
            raise ValueError("beta * t_ref >= 1 makes the weight negative; enable clamping")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if self.iters < 0 or self.lr <= 0 or self.batch_size < 1:
            raise ValueError("need iters >= 0, lr > 0, batch_size >= 1")


@dataclass
class SurgeryTrace:
    dot: float
    conflicted: bool
    norm_r: float
    norm_f: float
    norm_f_prime: float
    lam: float = math.nan
    t: int = 0


def modified_noise(x_t_f, x0_s, t, sched: NoiseSchedule) -> np.ndarray:
    """Noise that maps the surrogate ``x0_s`` onto the forget sample's noisy
    state: ``(x_t_f - sqrt(abar_t) x0_s) / sqrt(1 - abar_t)``."""
    return recover_noise(x_t_f, x0_s, t, sched)


def timestep_weight(t, beta: float, T: int, t_ref: int = 1000) -> float:
    """Remember-gradient weight ``1 - beta * t'`` where ``t' = t * t_ref / T``
    rescales ``t`` to the reference horizon; clamped to ``[0, 1]``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lam = 1.0 - beta * (float(t) * t_ref / T)
    return min(1.0, max(0.0, lam))


def gradient_surgery(g_r, g_f) -> tuple[np.ndarray, SurgeryTrace]:
    """Remove from ``g_f`` its component along ``g_r`` when they conflict.

    ``g_f' = g_f - (g_r.g_f / ||g_r||^2) g_r`` if ``g_r.g_f < 0``, else
    ``g_f`` itself (the same object, unmodified).
    """
    g_r = np.asarray(g_r, dtype=float)
    g_f = np.asarray(g_f, dtype=float)
    if g_r.shape != g_f.shape:
        raise DimensionMismatch(f"{g_r.shape} vs {g_f.shape}")
    dot = float(g_r @ g_f)
    nr = float(np.linalg.norm(g_r))
    nf = float(np.linalg.norm(g_f))
    if dot < 0 and nr < DEGENERATE_NORM:
        log.warning("remember gradient norm %.3e below %.0e; skipping projection", nr, DEGENERATE_NORM)
        return g_f, SurgeryTrace(dot, False, nr, nf, nf)
    if dot < 0:
        out = g_f - (dot / (nr * nr)) * g_r
        resid = float(out @ g_r)
        if resid < 0:  # rounding left a sliver along g_r; project once more
            out = out - (resid / (nr * nr)) * g_r
            if float(out @ g_r) < 0:  # g_f is numerically collinear with g_r
                out = np.zeros_like(out)
        return out, SurgeryTrace(dot, True, nr, nf, float(np.linalg.norm(out)))
    return g_f, SurgeryTrace(dot, False, nr, nf, nf)


def combine_parts(g_r, g_f, mode: str = "project_gf") -> tuple[np.ndarray, np.ndarray, SurgeryTrace]:
    """Like :func:`combine_gradients` but also returns the forget component
    that entered the sum (``g_f'`` for the projecting modes)."""
    if mode == "project_gf":
        g_fp, trace = gradient_surgery(g_r, g_f)
        return g_r + g_fp, g_fp, trace
    if mode == "none":
        _, trace = gradient_surgery(g_r, g_f)
        nf = float(np.linalg.norm(g_f))
        return g_r + g_f, g_f, SurgeryTrace(trace.dot, trace.dot < 0, trace.norm_r, nf, nf)
    if mode == "project_both":
        g_fp, trace = gradient_surgery(g_r, g_f)
        g_rp = g_r
        if trace.conflicted and trace.norm_f > DEGENERATE_NORM:
            g_rp = g_r - (trace.dot / trace.norm_f**2) * g_f
        return g_rp + g_fp, g_fp, trace
    raise ValueError(f"unknown surgery mode {mode!r}")


def combine_gradients(g_r, g_f, mode: str = "project_gf") -> tuple[np.ndarray, SurgeryTrace]:
    """Final update direction for one of the surgery variants.

    ``project_gf`` is the method's default; ``none`` adds the raw gradients;
    ``project_both`` also strips from ``g_r`` its component along ``g_f``
    (symmetric, PCGrad style).
    """
    g, _, trace = combine_parts(g_r, g_f, mode)
    return g, trace


@dataclass
class StepResult:
    params: dn.DenoiserParams
    trace: SurgeryTrace
    loss_r: float
    loss_f: float
    eps_draws: int
    g_f: np.ndarray = field(repr=False, default=None)
    g_f_prime: np.ndarray = field(repr=False, default=None)
    g_r: np.ndarray = field(repr=False, default=None)


def task_streams(task: UnlearnTask) -> Streams:
    return Streams(task.seed)


def _weight(task: UnlearnTask, t: int) -> float:
    if task.constant_lambda is not None:
        return float(task.constant_lambda)
    return timestep_weight(t, task.beta, task.schedule.T, task.t_ref)


def unlearn_step(
    params: dn.DenoiserParams,
    task: UnlearnTask,
    x0_f,
    x0_s,
    streams: Streams,
    loss_grad: Callable = dn.loss_and_grad,
    keep_grads: bool = False,
    lr: float | None = None,
) -> StepResult:
    """One iteration of the unlearning loop for forget sample ``x0_f`` with
    surrogate ``x0_s``; ``lr`` overrides the task's rate for this step."""
    sched = task.schedule
    B = task.batch_size
    x0_f = np.asarray(x0_f, dtype=float)
    x0_s = np.asarray(x0_s, dtype=float)
    idx = streams["remember"].integers(0, task.remember_set.shape[0], size=B)
    x0_r = task.remember_set[idx]
    t = int(streams["t"].integers(1, sched.T + 1))
    eps = streams["eps"].standard_normal(x0_r.shape)  # the only noise draw of the step
    x_t_r = forward_noise(x0_r, t, eps, sched)
    x_t_f = forward_noise(np.broadcast_to(x0_f, x0_r.shape), t, eps, sched)
    eps_mod = modified_noise(x_t_f, np.broadcast_to(x0_s, x0_r.shape), t, sched)

    loss_r, grad_r = loss_grad(params, x_t_r, t, eps)
    loss_f, grad_f = loss_grad(params, x_t_f, t, eps_mod)
    lam = _weight(task, t)
    g_r = lam * grad_r
    g_f = (1.0 - lam) * grad_f
    g, g_fp, trace = combine_parts(g_r, g_f, task.surgery)
    trace.lam, trace.t = lam, t
    new = dn.adam_update(params, g, task.lr if lr is None else lr)
    res = StepResult(new, trace, loss_r, loss_f, eps_draws=1)
    if keep_grads:
        res.g_r, res.g_f = g_r, g_f
        res.g_f_prime = g_fp
    return res


@dataclass
class RunResult:
    params: dn.DenoiserParams
    traces: list[dict]
    snapshots: list[tuple[int, int, dn.DenoiserParams]]


def step_lr(task: UnlearnTask, it: int) -> float:
    if task.lr_schedule == "cosine":
        return task.lr * 0.5 * (1.0 + math.cos(math.pi * it / task.iters))
    return task.lr


def iter_unlearn(params: dn.DenoiserParams, task: UnlearnTask, keep_grads: bool = False) -> Iterator[tuple[int, int, StepResult]]:
    """Yield ``(target, iteration, step_result)`` over the whole task."""
    streams = task_streams(task)
    p = params
    for j, (x0_f, x0_s) in enumerate(zip(task.forget_set, task.surrogates)):
        if j > 0 and task.reset_moments:
            p = p.reset_moments()
        for it in range(task.iters):
            try:
                res = unlearn_step(p, task, x0_f, x0_s, streams, keep_grads=keep_grads, lr=step_lr(task, it))
            except NonFiniteGradient as exc:
                raise NumericalFailure(f"target {j}, iteration {it}: {exc}", snapshot=p) from exc
            if not (math.isfinite(res.loss_r) and math.isfinite(res.loss_f)) or not np.all(np.isfinite(res.params.theta)):
                raise NumericalFailure(f"non-finite values at target {j}, iteration {it}", snapshot=p)
            p = res.params
            yield j, it, res


def trace_record(target: int, iteration: int, res: StepResult) -> dict:
    rec = {"target": target, "iteration": iteration}
    rec.update(asdict(res.trace))
    rec.update({"loss_r": res.loss_r, "loss_f": res.loss_f})
    return rec


def unlearn_run(
    params: dn.DenoiserParams,
    task: UnlearnTask,
    on_step: Callable[[dict], None] | None = None,
) -> RunResult:
    """Run every forget target sequentially for ``task.iters`` iterations.

    Returns final params, one trace record per iteration and parameter
    snapshots every ``task.snapshot_every`` iterations.
    """
    p = params
    traces: list[dict] = []
    snaps: list[tuple[int, int, dn.DenoiserParams]] = []
    for j, it, res in iter_unlearn(params, task):
        p = res.params
        rec = trace_record(j, it, res)
        traces.append(rec)
        if on_step:
            on_step(rec)
        if task.snapshot_every and (it + 1) % task.snapshot_every == 0:
            snaps.append((j, it + 1, p.copy()))
    return RunResult(p, traces, snaps)
