import numpy as np
import pytest

from unprompt import datasets as ds
from unprompt.rng import Streams, stream, stream_key


def test_glyph_dataset_shape_range_and_determinism():
    a, b = ds.make_glyphs(540, 0), ds.make_glyphs(540, 0)
    assert a.samples.shape == (540, 144)
    assert a.samples.min() >= -1 and a.samples.max() <= 1
    np.testing.assert_array_equal(a.samples, b.samples)
    assert not np.array_equal(a.labels, ds.make_glyphs(540, 1).labels)


def test_template_counts_follow_shares():
    d = ds.make_glyphs(540, 0)
    templates, shares = ds.default_templates()
    counts = np.bincount(d.labels, minlength=len(templates))
    assert counts.sum() == 540 and counts.min() >= 1
    np.testing.assert_allclose(counts, 540 * shares, atol=1)
    # rare templates are the last ones and the only ones with the low eye
    rare = [k for k, t in enumerate(templates) if t["eye_offset"] == 4.0]
    assert rare == [8, 9, 10, 11]


def test_rows_equal_their_rendered_template():
    d = ds.make_glyphs(120, 3)
    templates = d.descriptor.extra["templates"]
    for row, k, attrs in zip(d.samples, d.labels, d.attributes):
        assert attrs == templates[k]
        np.testing.assert_array_equal(row, ds.render_glyph(**attrs))


def test_eye_edit_touches_only_eye_region():
    base = ds.render_glyph(0.0, 1, -0.2)
    moved = ds.render_glyph(1.5, 1, -0.2)
    changed = (base != moved).reshape(12, 12)
    assert changed.any()
    assert not (changed & ~ds.attribute_mask("eye_offset")).any()


def test_fractional_offset_is_antialiased():
    img = ds.render_glyph(0.5, 0, 0.0).reshape(12, 12)
    # top eye row half covered: halfway between face tone 0 and eye value 1
    assert img[2, 3] == pytest.approx(0.5)
    assert img[3, 3] == pytest.approx(1.0)
    assert img[4, 3] == pytest.approx(0.5)


def test_render_rejects_out_of_range_offset():
    with pytest.raises(ValueError):
        ds.render_glyph(4.5)
    with pytest.raises(ValueError):
        ds.make_glyphs(5, 0)


def test_mixture():
    d = ds.make_mixture(400, n_modes=4, radius=3.0, std=0.05, seed=2)
    c = ds.mixture_centers(4, 3.0)
    np.testing.assert_allclose(c[0], [3.0, 0.0])
    assert np.all(np.linalg.norm(d.samples - c[d.labels], axis=1) < 0.5)
    assert ds.make_dataset("mixture", 10, 0).samples.shape == (10, 2)
    with pytest.raises(KeyError):
        ds.make_dataset("faces", 10, 0)


def test_to_unit():
    np.testing.assert_allclose(ds.to_unit([-1.0, 0.0, 1.0, 2.0]), [0.0, 0.5, 1.0, 1.0])


def test_streams_are_independent_and_reproducible():
    a = stream(0, "eps").standard_normal(4)
    np.testing.assert_array_equal(a, stream(0, "eps").standard_normal(4))
    assert not np.array_equal(a, stream(0, "t").standard_normal(4))
    assert not np.array_equal(a, stream(1, "eps").standard_normal(4))
    assert stream_key(0, "eps", 3) != stream_key(0, "eps", 4)
    s = Streams(0)
    assert s["eps"] is s["eps"]
    # drawing from one purpose never perturbs another
    s2 = Streams(0)
    s2["t"].integers(0, 10, size=100)
    np.testing.assert_array_equal(s2["eps"].standard_normal(3), Streams(0)["eps"].standard_normal(3))
