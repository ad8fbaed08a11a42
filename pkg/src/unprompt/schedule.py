"""The variance-preserving noise schedule (cumulative products of alpha)."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidRange, TimestepOutOfRange

# desk defaults: T=100 with the 1000-step linear schedule's betas scaled x10
DEFAULT_T = 100
DEFAULT_BETA_MIN = 1e-3
DEFAULT_BETA_MAX = 0.2


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """``alpha[t-1]`` is the per-step retention at timestep ``t`` and
    ``alpha_bar[t-1]`` its cumulative product (timesteps are 1-based)."""

    T: int
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def abar(self, t) -> np.ndarray:
        """Cumulative product at ``t``; ``abar(0) == 1``."""
        t = np.asarray(t)
        if np.any(t < 0) or np.any(t > self.T):
            raise TimestepOutOfRange(f"t must lie in [0, {self.T}]")
        return np.where(t == 0, 1.0, self.alpha_bar[np.maximum(t, 1) - 1])

    @property
    def betas(self) -> np.ndarray:
        return 1.0 - self.alpha

    def hash(self) -> bytes:
        h = hashlib.sha256()
        h.update(int(self.T).to_bytes(8, "little"))
        h.update(np.ascontiguousarray(self.alpha, dtype="<f8").tobytes())
        return h.digest()


def make_schedule(
    T: int = DEFAULT_T, beta_min: float = DEFAULT_BETA_MIN, beta_max: float = DEFAULT_BETA_MAX
) -> NoiseSchedule:
    """Linear betas from ``beta_min`` to ``beta_max`` over ``T`` steps."""
    if T < 2:
        raise InvalidRange("T must be at least 2")
    if not 0 < beta_min <= beta_max < 1:
        raise InvalidRange("need 0 < beta_min <= beta_max < 1")
    s = np.arange(1, T + 1)
    betas = beta_min + (s - 1) * (beta_max - beta_min) / (T - 1)
    alpha = 1.0 - betas
    return NoiseSchedule(T, alpha, np.cumprod(alpha))
