"""Procedural desk datasets: a 2-D Gaussian mixture and 12x12 glyph faces.

Both are generated from a seed; nothing is stored on disk.  Glyph pixels
live in ``[-1, 1]`` (background -1); :func:`to_unit` maps them to ``[0, 1]``
for SSIM.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

GLYPH_SIZE = 12
EYE_ROW = 2.0  # top edge of the eyes at eye_offset = 0
EYE_HEIGHT = 2.0
EYE_COLS = ((2, 5), (7, 10))
EYE_OFFSET_MAX = 4.0
MOUTH_ROWS = (8, 9)
MOUTH_VALUE = 1.0
FACE_TONES = (-0.6, -0.2)
EYE_OFFSETS = (0.0, 2.0)
MOUTH_CURVES = (-1, 1)
# rare glyphs stand in for individually memorized training images
RARE_EYE_OFFSETS = (4.0,)
RARE_TONES = (-0.6, -0.4)
RARE_SHARE = 0.01  # per rare template

ATTRIBUTES = ("eye_offset", "mouth_curve", "hue")


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    shape: tuple[int, ...]
    data_range: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))


@dataclass
class Dataset:
    descriptor: DatasetDescriptor
    samples: np.ndarray  # (n, d)
    labels: np.ndarray  # mode index (mixture) or template index (glyphs)
    attributes: list | None = None

    def __len__(self) -> int:
        return self.samples.shape[0]


# ---------------------------------------------------------------- mixture
def mixture_centers(n_modes: int = 8, radius: float = 2.0) -> np.ndarray:
    ang = 2 * np.pi * np.arange(n_modes) / n_modes
    return radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def make_mixture(
    n: int = 2048, n_modes: int = 8, radius: float = 2.0, std: float = 0.1, seed: int = 0
) -> Dataset:
    rng = np.random.default_rng(seed)
    centers = mixture_centers(n_modes, radius)
    labels = rng.integers(0, n_modes, size=n)
    x = centers[labels] + std * rng.standard_normal((n, 2))
    desc = DatasetDescriptor("mixture", (2,), None, {"n_modes": n_modes, "radius": radius, "std": std})
    return Dataset(desc, x, labels)


# ---------------------------------------------------------------- glyphs
def _box_coverage(lo: float, hi: float, n: int) -> np.ndarray:
    """Fraction of each unit cell ``[i, i+1)`` covered by ``[lo, hi)``."""
    i = np.arange(n)
    return np.clip(np.minimum(hi, i + 1) - np.maximum(lo, i), 0.0, 1.0)


def _mouth_pixels(curve: int) -> list[tuple[int, int]]:
    # +1 smiles (corners up), -1 frowns, 0 is lopsided (left corner up only)
    r0, r1 = MOUTH_ROWS
    mid = r0 if curve < 0 else r1
    pix = [(mid, c) for c in range(4, 8)]
    if curve > 0:
        pix += [(r0, 3), (r0, 8)]
    elif curve < 0:
        pix += [(r1, 3), (r1, 8)]
    else:
        pix += [(r0, 3), (r1, 8)]
    return pix


def face_mask() -> np.ndarray:
    yy, xx = np.mgrid[0:GLYPH_SIZE, 0:GLYPH_SIZE] + 0.5
    return ((yy - 6.0) / 5.6) ** 2 + ((xx - 6.0) / 5.2) ** 2 <= 1.0


def attribute_mask(attribute: str) -> np.ndarray:
    """Pixels a change of ``attribute`` is allowed to touch."""
    m = np.zeros((GLYPH_SIZE, GLYPH_SIZE), dtype=bool)
    if attribute == "eye_offset":
        r0, r1 = int(np.floor(EYE_ROW)), int(np.ceil(EYE_ROW + EYE_OFFSET_MAX + EYE_HEIGHT))
        for c0, c1 in EYE_COLS:
            m[r0:r1, c0:c1] = True
    elif attribute == "mouth_curve":
        m[MOUTH_ROWS[0] : MOUTH_ROWS[1] + 1, 3:9] = True
    elif attribute == "hue":
        m = face_mask().copy()
    else:
        raise KeyError(attribute)
    return m


def render_glyph(eye_offset: float = 0.0, mouth_curve: int = 0, hue: float = 0.0) -> np.ndarray:
    """Render one glyph as a flat ``(144,)`` vector in ``[-1, 1]``.

    ``eye_offset`` is in pixels (fractional offsets are box-antialiased),
    ``mouth_curve`` in {-1, 0, 1}, ``hue`` a face tone in ``[-1, 1]``.
    """
    if not 0.0 <= eye_offset <= EYE_OFFSET_MAX:
        raise ValueError(f"eye_offset must lie in [0, {EYE_OFFSET_MAX}]")
    img = np.full((GLYPH_SIZE, GLYPH_SIZE), -1.0)
    face = face_mask()
    img[face] = hue
    top = EYE_ROW + eye_offset
    cov_r = _box_coverage(top, top + EYE_HEIGHT, GLYPH_SIZE)
    for c0, c1 in EYE_COLS:
        cov = np.outer(cov_r, _box_coverage(c0, c1, GLYPH_SIZE))
        img = img * (1.0 - cov) + 1.0 * cov
    for r, c in _mouth_pixels(int(mouth_curve)):
        img[r, c] = MOUTH_VALUE
    return img.reshape(-1)


def glyph_templates(
    eye_offsets=EYE_OFFSETS, mouth_curves=MOUTH_CURVES, hues=FACE_TONES
) -> list[dict]:
    return [
        {"eye_offset": float(e), "mouth_curve": int(m), "hue": float(h)}
        for e, m, h in itertools.product(eye_offsets, mouth_curves, hues)
    ]


def default_templates() -> tuple[list[dict], np.ndarray]:
    """Common templates followed by the rare ones, with sampling shares."""
    common = glyph_templates()
    rare = glyph_templates(eye_offsets=RARE_EYE_OFFSETS, hues=RARE_TONES)
    shares = np.concatenate([np.full(len(common), (1.0 - RARE_SHARE * len(rare)) / len(common)),
                             np.full(len(rare), RARE_SHARE)])
    return common + rare, shares


def _counts(n: int, shares: np.ndarray) -> np.ndarray:
    # largest-remainder rounding, at least one copy of every template
    raw = n * shares / shares.sum()
    counts = np.maximum(np.floor(raw).astype(int), 1)
    order = np.argsort(-(raw - np.floor(raw)), kind="stable")
    k = 0
    while counts.sum() < n:
        counts[order[k % len(order)]] += 1
        k += 1
    while counts.sum() > n:
        counts[int(np.argmax(counts))] -= 1
    return counts


def make_glyphs(
    n: int = 540, seed: int = 0, templates: list[dict] | None = None, shares=None
) -> Dataset:
    """``n`` glyphs with template counts proportional to ``shares`` (uniform
    when templates are given without shares), shuffled by ``seed``.  Glyph
    id ``i`` is row ``i``."""
    if templates is None:
        templates, default_shares = default_templates()
        shares = default_shares if shares is None else shares
    shares = np.ones(len(templates)) if shares is None else np.asarray(shares, dtype=float)
    if n < len(templates):
        raise ValueError(f"need at least {len(templates)} glyphs, one per template")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(templates)), _counts(n, shares))[rng.permutation(n)]
    rendered = np.stack([render_glyph(**t) for t in templates])
    attrs = [dict(templates[k]) for k in labels]
    desc = DatasetDescriptor("glyph", (GLYPH_SIZE, GLYPH_SIZE), (-1.0, 1.0), {"templates": templates})
    return Dataset(desc, rendered[labels].copy(), labels, attrs)


def to_unit(x, data_range=(-1.0, 1.0)) -> np.ndarray:
    lo, hi = data_range
    return np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)


def make_dataset(name: str, n: int, seed: int, **kw) -> Dataset:
    if name == "glyph":
        return make_glyphs(n, seed, **kw)
    if name == "mixture":
        return make_mixture(n, seed=seed, **kw)
    raise KeyError(f"unknown dataset {name!r}")
