"""Shared fixtures.  The desk pretrained model takes a few minutes to
train, so it is cached on disk keyed by its config and the training data
(``UNPROMPT_CACHE`` overrides the cache directory)."""
from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np
import pytest

from unprompt import checkpoint as ck
from unprompt import experiments as ex
from unprompt.config import ExperimentConfig

ROOT = Path(__file__).resolve().parents[1]


def cache_dir() -> Path:
    d = Path(os.environ.get("UNPROMPT_CACHE", ROOT / ".cache"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def pretrained(cfg: ExperimentConfig):
    ds = ex.build_dataset(cfg)
    data_key = hashlib.sha256(np.ascontiguousarray(ds.samples).tobytes()).hexdigest()[:8]
    path = cache_dir() / f"pre-{ex.pretrain_hash(cfg)}-{data_key}.ckpt"
    sched = ex.build_schedule(cfg)
    if path.exists():
        return ck.load_checkpoint(path, sched)[0]
    p = ex.run_pretrain(cfg)
    ck.save_checkpoint(p, path, cfg["seed"])
    return p


@pytest.fixture(scope="session")
def desk_cfg() -> ExperimentConfig:
    return ExperimentConfig()


@pytest.fixture(scope="session")
def desk_pre(desk_cfg):
    return pretrained(desk_cfg)


@pytest.fixture(scope="session")
def tiny_cfg(tmp_path_factory) -> ExperimentConfig:
    out = tmp_path_factory.mktemp("runs")
    return ExperimentConfig({
        "out": str(out), "pretrain.steps": 30, "pretrain.batch": 16, "arch.hidden": (16,),
        "arch.embed_dim": 8, "unlearn.iters": 20, "eval.n_eps": 2, "eval.n_seeds": 4,
        "eval.seed_pool": 40, "eval.fd_samples": 60, "schedule.T": 20, "eval.t_mid": 5,
        "ablate.deltas": (1.0, 2.0), "dataset.n": 120,
    })


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
