"""Forget one rare glyph and look at what the model now reconstructs.

Noises the target to the mid timestep, denoises it with the pretrained and
the unlearned model, and prints target, surrogate and both reconstructions
as text images, followed by the metric report.

    python3 demos/forget_glyph.py --pre runs/checkpoints/pre-<hash>.ckpt
    python3 demos/forget_glyph.py --steps 4000     # quick, blurrier model

Without ``--pre`` the model is pretrained first (about 4 minutes at the
default 40000 steps on one core).
"""
import argparse

import numpy as np

from unprompt import checkpoint as ck
from unprompt import experiments as ex
from unprompt import metrics as mt
from unprompt.config import ExperimentConfig
from unprompt.diffusion import ddim_sample, forward_noise

SHADES = " .:-=+*#%@"


def text_image(x) -> list[str]:
    img = np.clip((np.asarray(x).reshape(12, 12) + 1) / 2, 0, 1)
    return ["".join(SHADES[int(round(v * (len(SHADES) - 1)))] * 2 for v in row) for row in img]


def side_by_side(images: dict) -> None:
    cols = [text_image(x) for x in images.values()]
    print("   ".join(f"{name:<24}" for name in images))
    for r in range(12):
        print("   ".join(col[r] for col in cols))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pre", help="pretrained checkpoint written by `unprompt pretrain`")
    ap.add_argument("--steps", type=int, help="pretraining steps when no checkpoint is given")
    ap.add_argument("--target", type=int, default=8, help="template label to forget (8-11 are rare)")
    args = ap.parse_args()

    over = {"unlearn.forget": (args.target,)}
    if args.steps:
        over["pretrain.steps"] = args.steps
    cfg = ExperimentConfig(over)
    sched = ex.build_schedule(cfg)
    if args.pre:
        pre, _ = ck.load_checkpoint(args.pre, sched)
    else:
        print(f"pretraining for {cfg['pretrain.steps']} steps ...")
        pre = ex.run_pretrain(cfg)

    print(f"unlearning template {args.target} for {cfg['unlearn.iters']} iterations ...")
    post = ex.run_unlearn(cfg, pre).params

    ds = ex.build_dataset(cfg)
    task = ex.build_task(cfg, ds, sched)
    x_f, x_s = task.forget_set[0], task.surrogates[0]
    t = cfg["eval.t_mid"]
    x_t = forward_noise(x_f, t, mt.noise_eps(0, x_f.shape), sched)
    clip = ds.descriptor.data_range
    print()
    side_by_side({
        "target": x_f,
        "surrogate": x_s,
        "pretrained reconstruction": ddim_sample(pre, x_t[None], sched, t_start=t, clip=clip)[0],
        "unlearned reconstruction": ddim_sample(post, x_t[None], sched, t_start=t, clip=clip)[0],
    })
    rep = ex.Evaluator(cfg, pre).evaluate(post, label=f"forget {args.target}")
    print()
    print(f"forgetting similarity {rep.forgetting_similarity:.3f} (forgotten below {cfg['eval.threshold']})")
    print(f"same-seed SSIM on {rep.n_seeds} other seeds {rep.ssim:.3f}")
    print(f"frechet pre/post {rep.frechet_pre:.3f} (two pretrained draws: {rep.extra['frechet_base']:.3f})")


if __name__ == "__main__":
    main()
