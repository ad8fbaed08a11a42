"""Command line entry point: ``unprompt <cmd> --config <path> [--seed N] [--out DIR]``.

Exit codes: 0 ok, 2 configuration error, 3 missing or unreadable
artifact, 4 numerical failure.  ``UNPROMPT_THREADS`` caps the BLAS
thread pools (it must be set before numpy loads, hence the early import
order here).
"""
from __future__ import annotations

import os

_threads = os.environ.get("UNPROMPT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse  # noqa: E402
import csv  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import time  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import checkpoint as ck  # noqa: E402
from . import experiments as ex  # noqa: E402
from . import ridge  # noqa: E402
from .config import ExperimentConfig, load_config, parse_text, save_config  # noqa: E402
from .errors import (  # noqa: E402
    ArchMismatch,
    ConfigInvalid,
    CovarianceFailure,
    IoFailure,
    MissingCheckpoint,
    NonFiniteGradient,
    NonFiniteLoss,
    NumericalFailure,
    ScheduleMismatch,
    StrategyDatasetMismatch,
    VersionMismatch,
)
from .report import export_report, fmt_value  # noqa: E402

log = logging.getLogger("unprompt")

COMMANDS = ("pretrain", "unlearn", "eval", "ablate-timestep", "ablate-surgery", "ablate-surrogate", "ridge-demo")
EXIT_OK, EXIT_CONFIG, EXIT_ARTIFACT, EXIT_NUMERIC = 0, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigInvalid, ScheduleMismatch, ArchMismatch, StrategyDatasetMismatch)):
        return EXIT_CONFIG
    if isinstance(exc, (MissingCheckpoint, IoFailure, VersionMismatch)):
        return EXIT_ARTIFACT
    if isinstance(exc, (NumericalFailure, CovarianceFailure, NonFiniteLoss, NonFiniteGradient)):
        return EXIT_NUMERIC
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unprompt", description="Prompt-free instance unlearning experiments.")
    ap.add_argument("cmd", choices=COMMANDS)
    ap.add_argument("--config", help="config file or named config (desk, paper-ddpm-analogue, paper-sd3-analogue)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", help="output root (overrides the config)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    ap.add_argument("--pre", help="pretrained checkpoint (default: the store under --out)")
    ap.add_argument("--post", help="unlearned checkpoint for eval (default: the store under --out)")
    ap.add_argument("--format", choices=("csv", "kv-text"), default="csv")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    over = parse_text("\n".join(args.set))
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["out"] = args.out
    return cfg.with_overrides(over) if over else cfg


class Run:
    """A run directory named by command, config hash and timestamp."""

    def __init__(self, cmd: str, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = Path(cfg["out"])
        stamp = time.strftime("%Y%m%d-%H%M%S")
        self.dir = self.root / f"{cmd}-{cfg.short_hash}-{stamp}"
        n = 1
        while self.dir.exists():
            n += 1
            self.dir = self.root / f"{cmd}-{cfg.short_hash}-{stamp}-{n}"
        try:
            self.dir.mkdir(parents=True)
            self.store.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create run directory {self.dir}: {exc.strerror}") from None
        save_config(cfg, self.dir / "config.txt")

    @property
    def store(self) -> Path:
        return self.root / "checkpoints"

    def pre_path(self) -> Path:
        return self.store / f"pre-{ex.pretrain_hash(self.cfg)}.ckpt"

    def post_path(self) -> Path:
        return self.store / f"post-{self.cfg.short_hash}.ckpt"


def _write_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows({k: fmt_value(v) for k, v in r.items()} for r in rows)


def _print_reports(reports) -> None:
    head = f"{'label':<28} {'similarity':>10} {'forgotten':>9} {'l2':>8} {'ssim':>8} {'fd_pre':>8}"
    print(head)
    for r in reports:
        print(f"{r.label:<28} {r.forgetting_similarity:>10.4f} {str(r.forgotten):>9} "
              f"{r.per_seed_l2:>8.4f} {r.ssim:>8.4f} {r.frechet_pre:>8.4f}")


def _load_pre(run: Run, args, cfg):
    path = Path(args.pre) if args.pre else run.pre_path()
    p, _ = ck.load_checkpoint(path, ex.build_schedule(cfg))
    return p


def cmd_pretrain(cfg, args, run: Run) -> None:
    losses = []
    p = ex.run_pretrain(cfg, on_step=lambda k, loss: losses.append((k, loss)) if k % 100 == 0 else None)
    digest = ck.save_checkpoint(p, run.dir / "pre.ckpt", cfg["seed"])
    ck.save_checkpoint(p, run.pre_path(), cfg["seed"])
    _write_rows(run.dir / "loss.csv", [{"step": k, "loss": v} for k, v in losses])
    print(f"checkpoint {run.pre_path()}")
    print(f"sha256 {digest}")


def cmd_unlearn(cfg, args, run: Run) -> None:
    pre = _load_pre(run, args, cfg)
    res = ex.run_unlearn(cfg, pre)
    ck.save_checkpoint(res.params, run.dir / "post.ckpt", cfg["seed"])
    digest = ck.save_checkpoint(res.params, run.post_path(), cfg["seed"])
    _write_rows(run.dir / "traces.csv", res.traces)
    conflicted = sum(t["conflicted"] for t in res.traces)
    print(f"checkpoint {run.post_path()}")
    print(f"sha256 {digest}")
    print(f"iterations {len(res.traces)} conflicted {conflicted}")


def cmd_eval(cfg, args, run: Run) -> None:
    pre = _load_pre(run, args, cfg)
    post_path = Path(args.post) if args.post else run.post_path()
    post, _ = ck.load_checkpoint(post_path, ex.build_schedule(cfg))
    rep = ex.Evaluator(cfg, pre).evaluate(post, label="eval")
    export_report([rep], "csv", run.dir / "report.csv")
    export_report([rep], "kv-text", run.dir / "report.txt")
    from .report import render

    print(render([rep], "kv-text"), end="")


def _ablation(fn):
    def cmd(cfg, args, run: Run) -> None:
        pre = _load_pre(run, args, cfg)
        reports = fn(cfg, pre)
        export_report(reports, args.format, run.dir / ("report.csv" if args.format == "csv" else "report.txt"))
        _print_reports(reports)

    return cmd


def _surrogate_ablation(cfg, pre):
    ev = ex.Evaluator(cfg, pre)
    return ex.ablate_surrogate_strategies(cfg, pre, ev) + ex.surrogate_sweep(cfg, pre, ev)


def cmd_ridge_demo(cfg, args, run: Run) -> None:
    p, i = ridge.default_demo_problem()
    p = ridge.RidgeProblem(p.X, p.y, cfg["ridge.penalty"])
    grid = np.linspace(cfg["ridge.grid_lo"], cfg["ridge.grid_hi"], cfg["ridge.grid_n"])
    rows = ridge.ridge_demo_sweep(p, i, grid)
    _write_rows(run.dir / "ridge.csv", rows)
    best = min(rows, key=lambda r: r["surrogate_shift"])
    hit = ridge.find_preserving_surrogate(rows)
    print(f"exact unlearning shift     {fmt_value(best['exact_shift'])}")
    print(f"best surrogate y_new       {fmt_value(best['y_new'])}")
    print(f"best surrogate shift       {fmt_value(best['surrogate_shift'])}")
    print(f"preserving (< 0.5x exact)  {'yes' if hit else 'no'}")


HANDLERS = {
    "pretrain": cmd_pretrain,
    "unlearn": cmd_unlearn,
    "eval": cmd_eval,
    "ablate-timestep": _ablation(lambda c, p: ex.ablate_timestep(c, p)),
    "ablate-surgery": _ablation(lambda c, p: ex.ablate_surgery(c, p)),
    "ablate-surrogate": _ablation(_surrogate_ablation),
    "ridge-demo": cmd_ridge_demo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        run = Run(args.cmd, cfg)
        HANDLERS[args.cmd](cfg, args, run)
    except Exception as exc:  # mapped to documented exit codes
        code = exit_code(exc)
        if code == 1:
            raise
        print(f"unprompt {args.cmd}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    print(f"run directory {run.dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
