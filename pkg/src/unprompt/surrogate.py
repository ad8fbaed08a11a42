"""Surrogate construction: edited stand-ins for a forget sample.

``AttributeEdit`` re-renders a glyph with one attribute changed and is the
high-fidelity strategy.  ``Flip`` and ``AddNoise`` are the cheap baselines;
``ModeShift`` moves a mixture point onto the nearest other mode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import datasets as dsets
from .errors import StrategyDatasetMismatch

STRATEGIES = ("flip", "add_noise", "mode_shift", "attribute_edit")


@dataclass(frozen=True)
class SurrogateSpec:
    """``sigma`` is in units of the data range (so ``50/255`` reads like an
    8-bit pixel sigma of 50).  ``delta`` is the attribute change; eye
    offsets move away from the nearer border when ``+delta`` would leave the
    valid range."""

    strategy: str = "attribute_edit"
    sigma: float = 0.0
    attribute: str = "eye_offset"
    delta: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown surrogate strategy {self.strategy!r}")
        if self.strategy == "add_noise" and not self.sigma > 0:
            raise ValueError("add_noise needs sigma > 0")
        if self.strategy == "attribute_edit" and self.attribute not in dsets.ATTRIBUTES:
            raise ValueError(f"unknown attribute {self.attribute!r}")

    def validate_for(self, descriptor: dsets.DatasetDescriptor) -> None:
        if self.strategy == "attribute_edit" and descriptor.name != "glyph":
            raise StrategyDatasetMismatch("attribute_edit only applies to glyph data")
        if self.strategy == "mode_shift" and descriptor.name != "mixture":
            raise StrategyDatasetMismatch("mode_shift only applies to mixture data")


def flip(x0, descriptor: dsets.DatasetDescriptor) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if len(descriptor.shape) == 2:
        return x.reshape(descriptor.shape)[:, ::-1].reshape(-1).copy()
    out = x.copy()
    out[0] = -out[0]
    return out


def add_noise(x0, sigma: float, descriptor: dsets.DatasetDescriptor, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if descriptor.data_range is None:
        return x + sigma * rng.standard_normal(x.shape)
    lo, hi = descriptor.data_range
    return np.clip(x + sigma * (hi - lo) * rng.standard_normal(x.shape), lo, hi)


def mode_shift(x0, descriptor: dsets.DatasetDescriptor) -> np.ndarray:
    """Translate the point from its own mode onto the nearest other mode."""
    x = np.asarray(x0, dtype=float)
    centers = dsets.mixture_centers(descriptor.extra.get("n_modes", 8), descriptor.extra.get("radius", 2.0))
    d_own = np.linalg.norm(centers - x, axis=1)
    own = int(np.argmin(d_own))
    d_other = np.linalg.norm(centers - centers[own], axis=1)
    d_other[own] = np.inf
    other = int(np.argmin(d_other))
    return x - centers[own] + centers[other]


def edited_attributes(attrs: dict, attribute: str, delta: float) -> dict:
    new = dict(attrs)
    if attribute == "eye_offset":
        v = attrs["eye_offset"] + delta
        if not 0.0 <= v <= dsets.EYE_OFFSET_MAX:
            v = attrs["eye_offset"] - delta
        new["eye_offset"] = float(np.clip(v, 0.0, dsets.EYE_OFFSET_MAX))
    elif attribute == "mouth_curve":
        new["mouth_curve"] = int((attrs["mouth_curve"] + 1 + int(round(delta))) % 3 - 1)
    elif attribute == "hue":
        v = attrs["hue"] + delta
        if not -1.0 <= v <= 1.0:
            v = attrs["hue"] - delta
        new["hue"] = float(np.clip(v, -1.0, 1.0))
    return new


def attribute_edit(attrs: dict, attribute: str, delta: float) -> np.ndarray:
    return dsets.render_glyph(**edited_attributes(attrs, attribute, delta))


def make_surrogate(
    x0_f,
    spec: SurrogateSpec,
    descriptor: dsets.DatasetDescriptor,
    attrs: dict | None = None,
) -> np.ndarray:
    """Build the surrogate of ``x0_f``; ``attrs`` (the glyph's generating
    attributes) is required for ``attribute_edit``."""
    spec.validate_for(descriptor)
    if spec.strategy == "flip":
        return flip(x0_f, descriptor)
    if spec.strategy == "add_noise":
        return add_noise(x0_f, spec.sigma, descriptor, np.random.default_rng(spec.seed))
    if spec.strategy == "mode_shift":
        return mode_shift(x0_f, descriptor)
    if attrs is None:
        raise ValueError("attribute_edit needs the glyph attributes")
    return attribute_edit(attrs, spec.attribute, spec.delta)
