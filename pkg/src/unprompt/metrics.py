"""Network-free evaluation: forgetting similarity, same-seed drift, SSIM
and the Frechet distance between Gaussian fits.

Forgetting similarity follows the noise-then-denoise protocol: noise the
forget sample to ``t_mid``, denoise it with the pretrained and the
unlearned model, and compare the two reconstructions by cosine similarity
after subtracting a centering vector.  Passing the background (dataset)
mean as ``center`` plays the role of descriptor centering in copy
detection; the default subtracts each output's own mean.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import denoiser as dn
from .diffusion import ddim_sample, forward_noise
from .errors import ArchMismatch, CovarianceFailure, DimensionMismatch
from .rng import stream
from .schedule import NoiseSchedule

FORGET_THRESHOLD = 0.4
SHRINKAGE = 1e-6
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def centered_cosine(a, b, center=None) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if center is None:
        a, b = a - a.mean(), b - b.mean()
    else:
        c = np.asarray(center, dtype=float).reshape(-1)
        a, b = a - c, b - c
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _check_pair(pre: dn.DenoiserParams, post: dn.DenoiserParams) -> None:
    if pre.arch != post.arch:
        raise ArchMismatch(f"{pre.arch.descriptor()} vs {post.arch.descriptor()}")
    if (pre.schedule is None) != (post.schedule is None) or (
        pre.schedule is not None and pre.schedule.hash() != post.schedule.hash()
    ):
        raise ArchMismatch("models were built for different noise schedules")


def noise_eps(seed: int, shape) -> np.ndarray:
    return stream(seed, "forget-eps").standard_normal(shape)


def forgetting_similarity(
    pre: dn.DenoiserParams,
    post: dn.DenoiserParams,
    x0_f,
    t_mid: int,
    sched: NoiseSchedule,
    eps_seed: int,
    center=None,
    clip=None,
) -> float:
    """Similarity of pre/post reconstructions of ``x0_f`` noised to ``t_mid``.

    ``eps_seed`` may also be a list of seeds, in which case the mean is
    returned (all seeds are denoised as one batch).
    """
    _check_pair(pre, post)
    x0_f = np.asarray(x0_f, dtype=float)
    seeds = np.atleast_1d(eps_seed)
    eps = np.stack([noise_eps(int(s), x0_f.shape) for s in seeds])
    x_t = forward_noise(np.broadcast_to(x0_f, eps.shape), t_mid, eps, sched)
    y_pre = ddim_sample(pre, x_t, sched, t_start=t_mid, clip=clip)
    y_post = ddim_sample(post, x_t, sched, t_start=t_mid, clip=clip)
    sims = [centered_cosine(a, b, center) for a, b in zip(y_pre, y_post)]
    return float(np.mean(sims)) if np.ndim(eps_seed) else sims[0]


def ssim(a, b, c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """Single-window SSIM over the whole image (inputs in ``[0, 1]``)."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    mu_a, mu_b = a.mean(), b.mean()
    var_a, var_b = a.var(), b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(num / den)


def seed_noise(seeds, d: int) -> np.ndarray:
    return np.stack([stream(int(s), "eval-xT").standard_normal(d) for s in seeds])


def _to_unit(y, data_range):
    if data_range is None:
        return y
    lo, hi = data_range
    return np.clip((y - lo) / (hi - lo), 0.0, 1.0)


def sample(params: dn.DenoiserParams, seeds, sched: NoiseSchedule, clip=None, steps=None) -> np.ndarray:
    """DDIM samples from the per-seed initial noise, one row per seed."""
    return ddim_sample(params, seed_noise(seeds, params.arch.data_dim), sched, steps=steps, clip=clip)


def drift_from_samples(y_pre, y_post, data_range=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-seed ``||y_pre - y_post|| / sqrt(d)`` and SSIM arrays."""
    y_pre, y_post = np.atleast_2d(y_pre), np.atleast_2d(y_post)
    d = y_pre.shape[1]
    l2 = np.linalg.norm(y_pre - y_post, axis=1) / np.sqrt(d)
    u_pre, u_post = _to_unit(y_pre, data_range), _to_unit(y_post, data_range)
    s = np.array([ssim(a, b) for a, b in zip(u_pre, u_post)])
    return l2, s


def per_seed_drift(pre, post, seeds, sched: NoiseSchedule, clip=None, data_range=None) -> tuple[float, float]:
    """Same-seed output drift between two models: ``(mean_l2, mean_ssim)``."""
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    _check_pair(pre, post)
    l2, s = drift_from_samples(sample(pre, seeds, sched, clip), sample(post, seeds, sched, clip), data_range)
    return float(l2.mean()), float(s.mean())


def _sqrt_psd(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh((S + S.T) / 2)
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.T


def frechet_distance(samples_a, samples_b) -> float:
    """Squared Frechet distance between Gaussian fits of two sample sets:
    ``||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})``."""
    A = np.atleast_2d(np.asarray(samples_a, dtype=float))
    B = np.atleast_2d(np.asarray(samples_b, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"feature dims {A.shape[1]} vs {B.shape[1]}")
    d = A.shape[1]
    mu_a, mu_b = A.mean(0), B.mean(0)

    def cov(X):
        S = np.cov(X, rowvar=False).reshape(d, d) if X.shape[0] > 1 else np.zeros((d, d))
        return S + SHRINKAGE * np.eye(d) if X.shape[0] < 2 * d else S

    Sa, Sb = cov(A), cov(B)
    try:
        ra = _sqrt_psd(Sa)
        w = np.linalg.eigvalsh(ra @ Sb @ ra)
    except np.linalg.LinAlgError as exc:
        raise CovarianceFailure(str(exc)) from exc
    tr_sqrt = np.sqrt(np.clip(w, 0, None)).sum()
    d2 = float(((mu_a - mu_b) ** 2).sum() + np.trace(Sa) + np.trace(Sb) - 2.0 * tr_sqrt)
    if d2 < -1e-8:
        raise CovarianceFailure(f"negative squared distance {d2}")
    return max(d2, 0.0)


SCHEMA_VERSION = 1


@dataclass
class MetricReport:
    forgetting_similarity: float
    forgotten: bool
    per_seed_l2: float
    ssim: float
    frechet_pre: float
    frechet_real: float
    n_seeds: int
    config_hash: str = ""
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not all(
            np.isfinite(v)
            for v in (self.forgetting_similarity, self.per_seed_l2, self.ssim, self.frechet_pre, self.frechet_real)
        ):
            raise ValueError("metric report fields must be finite")

    @classmethod
    def build(cls, similarity: float, threshold: float = FORGET_THRESHOLD, **kw) -> "MetricReport":
        return cls(forgetting_similarity=similarity, forgotten=similarity < threshold, **kw)

    def as_dict(self) -> dict:
        return asdict(self)
