import pytest

from unprompt.config import NAMED, SCHEMA, ExperimentConfig, load_config, named, parse_text, save_config
from unprompt.errors import ConfigInvalid


def test_defaults_and_lookup():
    cfg = ExperimentConfig()
    assert cfg["schedule.T"] == 100 and cfg["unlearn.forget"] == (8,)
    assert set(cfg.values) == set(SCHEMA)


def test_hash_ignores_key_order_and_formatting(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    a.write_text("unlearn.iters = 100\nseed = 3\n")
    b.write_text("# comment\nseed=3   \n\nunlearn.iters =   100  # trailing\n")
    assert load_config(a).hash() == load_config(b).hash()
    assert load_config(a).hash() != ExperimentConfig({"seed": 4, "unlearn.iters": 100}).hash()
    assert len(load_config(a).short_hash) == 12


def test_save_load_round_trip(tmp_path):
    cfg = named("desk-sequential").with_overrides({"unlearn.constant_lambda": 0.9, "eval.clip": "off"})
    save_config(cfg, tmp_path / "c.txt")
    back = load_config(tmp_path / "c.txt")
    assert back == cfg and back.hash() == cfg.hash()


def test_base_named_config(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("base = paper-sd3-analogue\nunlearn.iters = 7\n")
    cfg = load_config(f)
    assert cfg["unlearn.lr"] == 1e-5 and cfg["unlearn.iters"] == 7


def test_named_configs_are_valid():
    for name in NAMED:
        assert load_config(name) == named(name)
    assert named("desk-sequential")["unlearn.forget"] == (8, 9, 10, 11)


@pytest.mark.parametrize("values", [
    {"bogus.key": 1},
    {"schedule.T": "ten"},
    {"eval.t_mid": 500},
    {"unlearn.lr": 0},
    {"dataset.name": "faces"},
    {"eval.clip": "maybe"},
    {"eval.seed_pool": 2},
])
def test_invalid_values(values):
    with pytest.raises(ConfigInvalid):
        ExperimentConfig(values)


def test_parse_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        parse_text("seed 3")
    with pytest.raises(ConfigInvalid):
        parse_text("seed = 1\nseed = 2")
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.txt")
    with pytest.raises(ConfigInvalid):
        named("nope")
