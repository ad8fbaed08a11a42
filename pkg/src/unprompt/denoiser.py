"""The noise-prediction network: an MLP over ``[x_t, embed(t)]``.

Parameters live in one flat float64 vector ``theta``; layer ``k`` owns a
row-major ``(n_in, n_out)`` weight block followed by its ``n_out`` bias.

With ``Arch.sigma_data`` set, the MLP ``F`` is wrapped in the usual
input/skip/output preconditioning.  Writing ``s = sqrt(abar_t)``,
``n = sqrt(1 - abar_t)``, ``sigma = n / s`` and ``y = x_t / s``::

    x0_hat = c_skip * y + c_out * F(c_in * y, t)
    eps    = (x_t - s * x0_hat) / n

with ``c_in = 1/sqrt(sigma^2 + sd^2)``, ``c_skip = sd^2 / (sigma^2 + sd^2)``
and ``c_out = sigma * sd / sqrt(sigma^2 + sd^2)``.  This needs the noise
schedule, so preconditioned params carry the one they were built for.
Without ``sigma_data`` the MLP output is the noise prediction itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, _sigmoid
from .errors import DimensionMismatch, InvalidArch, NonFiniteGradient
from .schedule import NoiseSchedule

ACTIVATIONS = ("silu", "tanh")


@dataclass(frozen=True)
class Arch:
    layer_sizes: tuple[int, ...]
    activation: str = "silu"
    embed_dim: int = 32
    sigma_data: float | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidArch(f"bad layer sizes {sizes}")
        if self.activation not in ACTIVATIONS:
            raise InvalidArch(f"unknown activation {self.activation!r}")
        if self.embed_dim < 0 or self.embed_dim % 2:
            raise InvalidArch("embed_dim must be a non-negative even number")
        if sizes[0] <= self.embed_dim:
            raise InvalidArch("input layer must exceed the time-embedding width")
        if sizes[-1] != sizes[0] - self.embed_dim:
            raise InvalidArch("output width must equal the data dimension")
        if self.sigma_data is not None and not self.sigma_data > 0:
            raise InvalidArch("sigma_data must be positive")

    @classmethod
    def for_data(cls, d: int, hidden=(128, 128), embed_dim: int = 32, activation: str = "silu", sigma_data=None):
        return cls((d + embed_dim, *hidden, d), activation, embed_dim, sigma_data)

    @property
    def data_dim(self) -> int:
        return self.layer_sizes[0] - self.embed_dim

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))

    def slices(self):
        """Yield ``(weight_slice, weight_shape, bias_slice)`` per layer."""
        off = 0
        s = self.layer_sizes
        for a, b in zip(s[:-1], s[1:]):
            yield slice(off, off + a * b), (a, b), slice(off + a * b, off + a * b + b)
            off += a * b + b

    def descriptor(self) -> str:
        sd = "none" if self.sigma_data is None else repr(float(self.sigma_data))
        return f"{'-'.join(map(str, self.layer_sizes))}/{self.activation}/{self.embed_dim}/{sd}"

    @classmethod
    def from_descriptor(cls, text: str) -> "Arch":
        try:
            sizes, act, emb, sd = text.split("/")
            return cls(tuple(int(s) for s in sizes.split("-")), act, int(emb), None if sd == "none" else float(sd))
        except ValueError as exc:
            raise InvalidArch(f"bad arch descriptor {text!r}") from exc


@dataclass
class DenoiserParams:
    arch: Arch
    theta: np.ndarray
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    step: int = 0
    schedule: NoiseSchedule | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.arch.n_params,):
            raise InvalidArch(f"theta has {self.theta.size} entries, arch needs {self.arch.n_params}")
        if self.m is None:
            self.m = np.zeros_like(self.theta)
        if self.v is None:
            self.v = np.zeros_like(self.theta)
        if self.arch.sigma_data is not None and self.schedule is None:
            raise InvalidArch("a preconditioned arch needs a noise schedule")

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.arch, self.theta.copy(), self.m.copy(), self.v.copy(), self.step, self.schedule)

    def with_theta(self, theta) -> "DenoiserParams":
        out = self.copy()
        out.theta = np.array(theta, dtype=np.float64)
        return out

    def reset_moments(self) -> "DenoiserParams":
        return DenoiserParams(self.arch, self.theta.copy(), schedule=self.schedule)


def init_params(arch: Arch, seed, schedule: NoiseSchedule | None = None) -> DenoiserParams:
    """Fan-in uniform weights ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``, zero
    biases, zero optimizer moments."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = np.zeros(arch.n_params)
    for w, (a, b), _ in arch.slices():
        bound = 1.0 / np.sqrt(a)
        theta[w] = rng.uniform(-bound, bound, size=a * b)
    return DenoiserParams(arch, theta, schedule=schedule)


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding; ``t`` scalar or ``(B,)`` -> ``(B, dim)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def _prepare(p: DenoiserParams, x_t, t):
    """Returns (mlp input, skip term, output scale or None, single)."""
    arch = p.arch
    x = np.asarray(x_t, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != arch.data_dim:
        raise DimensionMismatch(f"sample has {x.shape[1]} dims, network expects {arch.data_dim}")
    t = np.asarray(t)
    if t.ndim == 0:
        t = np.full(x.shape[0], t)
    emb = time_embedding(t, arch.embed_dim)
    if arch.sigma_data is None:
        return np.concatenate([x, emb], axis=1), None, None, single
    ab = p.schedule.abar(t)[:, None]
    s, n = np.sqrt(ab), np.sqrt(1.0 - ab)
    sigma, sd = n / s, arch.sigma_data
    norm = sigma * sigma + sd * sd
    c_in, c_skip, c_out = 1.0 / np.sqrt(norm), sd * sd / norm, sigma * sd / np.sqrt(norm)
    # eps = x (1 - c_skip) / n - (s c_out / n) F
    return np.concatenate([c_in * x / s, emb], axis=1), x * (1.0 - c_skip) / n, s * c_out / n, single


def _act(name: str, h: np.ndarray) -> np.ndarray:
    return h * _sigmoid(h) if name == "silu" else np.tanh(h)


def predict_noise(p: DenoiserParams, x_t, t) -> np.ndarray:
    """epsilon_theta(x_t, t) for a single sample ``(d,)`` or a batch ``(B, d)``."""
    h, skip, scale, single = _prepare(p, x_t, t)
    layers = list(p.arch.slices())
    for k, (w, shape, b) in enumerate(layers):
        h = h @ p.theta[w].reshape(shape) + p.theta[b]
        if k < len(layers) - 1:
            h = _act(p.arch.activation, h)
    if skip is not None:
        h = skip - h * scale
    return h[0] if single else h


def record_forward(p: DenoiserParams, x_t, t, tape: Tape | None = None):
    """Record the forward pass on a tape.  Returns ``(tape, output_var)``;
    every weight block and bias is a tape parameter in theta order."""
    tape = tape or Tape()
    h_val, skip, scale, _ = _prepare(p, x_t, t)
    h = tape.const(h_val)
    layers = list(p.arch.slices())
    for k, (w, shape, b) in enumerate(layers):
        W = tape.param(p.theta[w].reshape(shape))
        bias = tape.param(p.theta[b])
        h = h @ W + bias
        if k < len(layers) - 1:
            h = h.silu() if p.arch.activation == "silu" else h.tanh()
    if skip is not None:
        h = tape.const(skip) - h * tape.const(scale)
    return tape, h


def loss_and_grad(p: DenoiserParams, x_t, t, target, weight: float = 1.0) -> tuple[float, np.ndarray]:
    """``weight * mean_b ||target_b - eps_theta(x_t_b, t_b)||^2`` and its
    gradient with respect to ``theta``."""
    tape, out = record_forward(p, x_t, t)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if target.shape != out.shape:
        raise DimensionMismatch(f"target shape {target.shape} != output shape {out.shape}")
    loss = (out - target).square().sum() * (weight / target.shape[0])
    return float(loss.value), tape.backward(loss)


def adam_update(
    p: DenoiserParams,
    g,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> DenoiserParams:
    """One bias-corrected Adam step; returns new params, ``p`` untouched."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != p.theta.shape:
        raise DimensionMismatch(f"gradient has {g.size} entries, theta has {p.theta.size}")
    if lr <= 0:
        raise ValueError("lr must be positive")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient contains non-finite entries")
    step = p.step + 1
    m = beta1 * p.m + (1.0 - beta1) * g
    v = beta2 * p.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    theta = p.theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return DenoiserParams(p.arch, theta, m, v, step, p.schedule)
