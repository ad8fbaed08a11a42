"""Experiment orchestration: pretrain, unlearn, evaluate and the ablations.

Everything here is a pure function of an :class:`ExperimentConfig`; the
CLI adds run directories and file output on top.  Randomness comes from
named streams of the master seed (``init`` and ``data`` for pretraining,
the unlearning task's own streams, fixed seed ranges for evaluation).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import datasets as dsets
from . import denoiser as dn
from . import metrics as mt
from .config import ExperimentConfig
from .diffusion import pretrain
from .errors import ConfigInvalid
from .rng import stream
from .schedule import NoiseSchedule, make_schedule
from .surrogate import SurrogateSpec, make_surrogate
from .unlearn import RunResult, UnlearnTask, unlearn_run

log = logging.getLogger(__name__)

PRETRAIN_KEYS = ("seed", "dataset.", "schedule.", "arch.", "pretrain.")


def build_schedule(cfg: ExperimentConfig) -> NoiseSchedule:
    return make_schedule(cfg["schedule.T"], cfg["schedule.beta_min"], cfg["schedule.beta_max"])


def build_dataset(cfg: ExperimentConfig) -> dsets.Dataset:
    return dsets.make_dataset(cfg["dataset.name"], cfg["dataset.n"], cfg["dataset.seed"])


def build_arch(cfg: ExperimentConfig, d: int) -> dn.Arch:
    return dn.Arch.for_data(
        d, cfg["arch.hidden"], cfg["arch.embed_dim"], cfg["arch.activation"], cfg["arch.sigma_data"]
    )


def pretrain_hash(cfg: ExperimentConfig) -> str:
    """Hash of the keys that determine the pretrained model."""
    import hashlib

    keep = [line for line in cfg.canonical().splitlines() if line.split(" = ")[0].startswith(PRETRAIN_KEYS)]
    return hashlib.sha256("\n".join(keep).encode()).hexdigest()[:12]


def run_pretrain(cfg: ExperimentConfig, on_step=None) -> dn.DenoiserParams:
    sched = build_schedule(cfg)
    ds = build_dataset(cfg)
    arch = build_arch(cfg, ds.descriptor.dim)
    seed = cfg["seed"]
    p = dn.init_params(arch, stream(seed, "init"), sched if arch.sigma_data is not None else None)
    t0 = time.time()

    def report(k, loss):
        if on_step:
            on_step(k, loss)
        if (k + 1) % 2000 == 0:
            log.info("pretrain step %d/%d loss %.4f (%.0fs)", k + 1, cfg["pretrain.steps"], loss, time.time() - t0)

    return pretrain(
        p, ds.samples, sched, cfg["pretrain.steps"], cfg["pretrain.batch"], cfg["pretrain.lr"],
        stream(seed, "data"), cfg["pretrain.warmup"], on_step=report,
    )


# ---------------------------------------------------------------- tasks
def target_rows(ds: dsets.Dataset, labels) -> list[int]:
    """Row of the first sample of each requested label (template or mode)."""
    rows = []
    for k in labels:
        hit = np.flatnonzero(ds.labels == k)
        if hit.size == 0:
            raise ConfigInvalid(f"forget label {k} does not occur in the {ds.descriptor.name} dataset")
        rows.append(int(hit[0]))
    return rows


def reference_points(ds: dsets.Dataset) -> np.ndarray:
    """One rendered point per label: glyph templates or mixture centers."""
    if ds.descriptor.name == "glyph":
        return np.stack([dsets.render_glyph(**t) for t in ds.descriptor.extra["templates"]])
    return dsets.mixture_centers(ds.descriptor.extra["n_modes"], ds.descriptor.extra["radius"])


def near_labels(ds: dsets.Dataset, forget: np.ndarray, radius: float, labels) -> np.ndarray:
    """Labels whose reference point lies within squared distance ``radius``
    of a forget sample, plus the forget labels themselves."""
    ref = reference_points(ds)
    d2 = ((ref[:, None, :] - forget[None]) ** 2).sum(-1).min(1)
    return np.union1d(np.flatnonzero(d2 < radius), np.asarray(labels, dtype=int))


def surrogate_spec(cfg: ExperimentConfig, **kw) -> SurrogateSpec:
    base = dict(strategy=cfg["surrogate.strategy"], sigma=cfg["surrogate.sigma"],
                attribute=cfg["surrogate.attribute"], delta=cfg["surrogate.delta"], seed=cfg["seed"])
    base.update(kw)
    return SurrogateSpec(**base)


def build_task(
    cfg: ExperimentConfig, ds: dsets.Dataset, sched: NoiseSchedule, spec: SurrogateSpec | None = None
) -> UnlearnTask:
    """Forget the first glyph of every ``unlearn.forget`` label.

    The remember set is the training data minus every sample within
    squared distance ``unlearn.dedup_radius`` of a forget sample, so exact
    and near duplicates of a target do not pull it back.
    """
    rows = target_rows(ds, cfg["unlearn.forget"])
    forget = ds.samples[rows]
    spec = spec or surrogate_spec(cfg)
    attrs = ds.attributes or [None] * len(ds)
    surr = np.stack([make_surrogate(ds.samples[r], spec, ds.descriptor, attrs[r]) for r in rows])
    d2 = ((ds.samples[:, None, :] - forget[None]) ** 2).sum(-1).min(1)
    remember = ds.samples[d2 >= max(cfg["unlearn.dedup_radius"], 1e-12)]
    if remember.shape[0] == 0:
        raise ConfigInvalid("unlearn.dedup_radius removes the whole remember set")
    return UnlearnTask(
        forget, remember, surr, sched,
        iters=cfg["unlearn.iters"], lr=cfg["unlearn.lr"], beta=cfg["unlearn.beta"],
        batch_size=cfg["unlearn.batch"], t_ref=cfg["unlearn.t_ref"], surgery=cfg["unlearn.surgery"],
        constant_lambda=cfg["unlearn.constant_lambda"], reset_moments=cfg["unlearn.reset_moments"],
        lr_schedule=cfg["unlearn.lr_schedule"],
        snapshot_every=cfg["unlearn.snapshot_every"] or max(cfg["unlearn.iters"], 1), seed=cfg["seed"],
    )


def run_unlearn(cfg: ExperimentConfig, pre: dn.DenoiserParams, spec: SurrogateSpec | None = None, on_step=None) -> RunResult:
    """Unlearning starts from fresh optimizer moments; they are then kept
    across sequential targets unless ``unlearn.reset_moments`` is set."""
    ds = build_dataset(cfg)
    task = build_task(cfg, ds, build_schedule(cfg), spec)
    return unlearn_run(pre.reset_moments(), task, on_step=on_step)


# ---------------------------------------------------------------- evaluation
@dataclass
class Evaluator:
    """Caches the pretrained model's samples so that ablations over one
    pretrained model reuse them."""

    cfg: ExperimentConfig
    pre: dn.DenoiserParams
    ds: dsets.Dataset = None
    sched: NoiseSchedule = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.ds = self.ds or build_dataset(self.cfg)
        self.sched = self.sched or build_schedule(self.cfg)

    @property
    def clip(self):
        return self.ds.descriptor.data_range if self.cfg["eval.clip"] else None

    @property
    def center(self) -> np.ndarray:
        return self.ds.samples.mean(0)

    def _pre(self, key, seeds) -> np.ndarray:
        if key not in self._cache:
            self._cache[key] = mt.sample(self.pre, seeds, self.sched, self.clip)
        return self._cache[key]

    def fd_seeds(self, which: str) -> np.ndarray:
        return self.cfg[f"eval.fd_seed_{which}"] + np.arange(self.cfg["eval.fd_samples"])

    def pool_seeds(self) -> np.ndarray:
        return self.cfg["eval.seed_start"] + np.arange(self.cfg["eval.seed_pool"])

    def non_forget_seeds(self, labels) -> np.ndarray:
        """First ``eval.n_seeds`` pool seeds whose pretrained sample is not
        nearest to a forget target or one of its near duplicates."""
        seeds = self.pool_seeds()
        y = self._pre("pool", seeds)
        ref = reference_points(self.ds)
        nearest = np.argmin(((y[:, None, :] - ref[None]) ** 2).sum(-1), axis=1)
        rows = target_rows(self.ds, labels)
        excl = near_labels(self.ds, self.ds.samples[rows], self.cfg["unlearn.dedup_radius"], labels)
        keep = ~np.isin(nearest, excl)
        return seeds[keep][: self.cfg["eval.n_seeds"]]

    def similarities(self, post: dn.DenoiserParams, labels) -> list[float]:
        eps = list(range(self.cfg["eval.n_eps"]))
        return [
            mt.forgetting_similarity(self.pre, post, self.ds.samples[r], self.cfg["eval.t_mid"], self.sched,
                                     eps, center=self.center, clip=self.clip)
            for r in target_rows(self.ds, labels)
        ]

    def drift(self, post: dn.DenoiserParams, labels) -> tuple[np.ndarray, np.ndarray]:
        seeds = self.non_forget_seeds(labels)
        pool = self.pool_seeds()
        y_pre = self._pre("pool", pool)[np.isin(pool, seeds)]
        y_post = mt.sample(post, seeds, self.sched, self.clip)
        return mt.drift_from_samples(y_pre, y_post, self.ds.descriptor.data_range)

    def frechet_baseline(self) -> float:
        if "fd_base" not in self._cache:
            self._cache["fd_base"] = mt.frechet_distance(self._pre("fd_a", self.fd_seeds("a")),
                                                         self._pre("fd_b", self.fd_seeds("b")))
        return self._cache["fd_base"]

    def frechet(self, post: dn.DenoiserParams) -> tuple[float, float]:
        """``(frechet_pre, frechet_real)``; the pre/post sets share seeds."""
        y_post = mt.sample(post, self.fd_seeds("a"), self.sched, self.clip)
        return (mt.frechet_distance(self._pre("fd_a", self.fd_seeds("a")), y_post),
                mt.frechet_distance(y_post, self.ds.samples))

    def evaluate(self, post: dn.DenoiserParams, labels=None, label: str = "", frechet: bool = True) -> mt.MetricReport:
        """Full report; ``forgetting_similarity`` is the worst target's, so
        ``forgotten`` means every target is below the threshold."""
        mt._check_pair(self.pre, post)
        labels = tuple(self.cfg["unlearn.forget"] if labels is None else labels)
        sims = self.similarities(post, labels)
        l2, ss = self.drift(post, labels)
        extra = {f"sim_{k}": s for k, s in zip(labels, sims)}
        if frechet:
            fd_pre, fd_real = self.frechet(post)
            extra["frechet_base"] = self.frechet_baseline()
        else:
            fd_pre = fd_real = 0.0
        return mt.MetricReport.build(
            max(sims), self.cfg["eval.threshold"], per_seed_l2=float(l2.mean()), ssim=float(ss.mean()),
            frechet_pre=fd_pre, frechet_real=fd_real, n_seeds=int(l2.size),
            config_hash=self.cfg.short_hash, label=label, extra=extra,
        )


# ---------------------------------------------------------------- ablations
def _run_and_eval(ev: Evaluator, cfg: ExperimentConfig, label: str, spec=None, frechet=True, runs=None):
    t0 = time.time()
    res = run_unlearn(cfg, ev.pre, spec)
    rep = ev.evaluate(res.params, cfg["unlearn.forget"], label, frechet)
    rep.config_hash = cfg.short_hash
    rep.extra["seconds"] = round(time.time() - t0, 1)
    log.info("%s: similarity %.3f ssim %.3f frechet_pre %.3f", label, rep.forgetting_similarity, rep.ssim, rep.frechet_pre)
    if runs is not None:
        runs[label] = res
    return rep


def ablate_timestep(cfg: ExperimentConfig, pre, ev: Evaluator | None = None, runs=None) -> list[mt.MetricReport]:
    """Timestep-aware weighting against a constant remember weight."""
    ev = ev or Evaluator(cfg, pre)
    aware = cfg.with_overrides({"unlearn.constant_lambda": None})
    const = cfg.with_overrides({"unlearn.constant_lambda": cfg["ablate.constant_lambda"]})
    return [
        _run_and_eval(ev, const, f"constant lambda={cfg['ablate.constant_lambda']:g}", frechet=False, runs=runs),
        _run_and_eval(ev, aware, f"timestep-aware beta={cfg['unlearn.beta']:g}", frechet=False, runs=runs),
    ]


def ablate_surgery(cfg: ExperimentConfig, pre, ev: Evaluator | None = None, modes=None, runs=None) -> list[mt.MetricReport]:
    ev = ev or Evaluator(cfg, pre)
    modes = modes or [m.strip() for m in cfg["ablate.surgeries"].split(",") if m.strip()]
    return [_run_and_eval(ev, cfg.with_overrides({"unlearn.surgery": m}), m, runs=runs) for m in modes]


def ablate_surrogate_strategies(cfg: ExperimentConfig, pre, ev: Evaluator | None = None) -> list[mt.MetricReport]:
    ev = ev or Evaluator(cfg, pre)
    out = []
    for name in [s.strip() for s in cfg["ablate.strategies"].split(",") if s.strip()]:
        kw = {"strategy": name}
        if name == "add_noise":
            kw["sigma"] = cfg["ablate.noise_sigma"]
        out.append(_run_and_eval(ev, cfg, name, surrogate_spec(cfg, **kw), frechet=False))
    return out


def surrogate_sweep(cfg: ExperimentConfig, pre, ev: Evaluator | None = None, deltas=None) -> list[mt.MetricReport]:
    """Attribute-edit magnitude sweep, one report per magnitude in order."""
    ev = ev or Evaluator(cfg, pre)
    deltas = cfg["ablate.deltas"] if deltas is None else deltas
    out = []
    for d in sorted(float(x) for x in deltas):
        rep = _run_and_eval(ev, cfg, f"delta={d:g}", surrogate_spec(cfg, delta=d), frechet=False)
        rep.extra["magnitude"] = d
        out.append(rep)
    return out
