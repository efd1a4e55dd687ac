#!/usr/bin/env python3
"""Run the architecture ablations on the synthetic dataset and print one
PSNR/SSIM table per variant: full model, no gated fusion, no contextual
aggregation, fixed-scale aggregation, no cross borrowing, single stream.

    python3 scripts/ablation_grid.py --iters 150 --size 32
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dualpaint.config import DataConfig, RunConfig, TrainConfig
from dualpaint.generator import GeneratorConfig, matched_width_multiplier
from dualpaint.metrics import render_table
from dualpaint.trainer import Trainer, evaluate

VARIANTS = {
    "full": {},
    "no-gated-fusion": {"use_bigff": False},
    "no-contextual-aggregation": {"use_cfa": False},
    "fixed-scale-aggregation": {"multiscale_cfa": False},
    "no-cross-borrow": {"cross_borrow": False},
    "single-stream": {"two_stream": False},
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=150)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--samples", type=int, default=48)
    parser.add_argument("--holdout", type=int, default=12)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--only", choices=sorted(VARIANTS), help="run a single variant")
    args = parser.parse_args()

    base_model = GeneratorConfig(levels=4, base_channels=16, feature_channels=16)
    selected = {args.only: VARIANTS[args.only]} if args.only else VARIANTS
    for name, overrides in selected.items():
        model = replace(base_model, **overrides)
        if not model.two_stream:
            model = replace(model, width_multiplier=matched_width_multiplier(base_model))
        cfg = RunConfig(
            data=DataConfig(
                n_samples=args.samples, size=args.size, holdout=args.holdout, seed=args.seed
            ),
            model=model,
            train=TrainConfig(batch_size=6, max_iters=args.iters, seed=args.seed),
        )
        trainer = Trainer(cfg)
        trainer.train()
        reports = evaluate(trainer.generator, trainer.holdout_set)
        print(f"\n=== {name} ===")
        print(render_table(reports))
    return 0


if __name__ == "__main__":
    sys.exit(main())
