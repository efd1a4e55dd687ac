"""Command-line entry points: train, eval, infer, synth-data, serve.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numeric failure. The
DUALPAINT_CHECKPOINT_DIR environment variable supplies the default
checkpoint location for infer/eval/serve.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .data import save_image, save_mask, synth_dataset
from .errors import CheckpointError, ConfigError, InputError, NumericError
from .generator import inpaint
from .metrics import render_table, reports_to_json
from .trainer import Trainer, evaluate, load_checkpoint_payload, load_dataset, load_generator

ENV_CHECKPOINT_DIR = "DUALPAINT_CHECKPOINT_DIR"


def _default_checkpoint() -> str | None:
    root = os.environ.get(ENV_CHECKPOINT_DIR)
    return str(Path(root) / "checkpoint.pt") if root else None


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key-value config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="config override; wins over file values (repeatable)",
    )


def cmd_train(args) -> int:
    overrides = list(args.overrides)
    if args.max_iters is not None:
        overrides.append(f"train.max_iters={args.max_iters}")
    cfg = load_config(args.config, overrides)
    out_dir = Path(args.out_dir)
    trainer = Trainer(cfg, out_dir=out_dir)
    log_path = out_dir / "metrics.jsonl"
    if args.two_phase:
        history = trainer.train_two_phase(log_path=log_path)
        trainer.save_checkpoint(out_dir / "checkpoint.pt")
    else:
        history = trainer.train(log_path=log_path)
    print(f"trained {len(history)} iterations; checkpoint at {out_dir / 'checkpoint.pt'}")
    if history:
        print(f"final joint loss: {history[-1]['loss_joint']:.4f}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.overrides)
    samples = load_dataset(cfg.data)
    if args.oracle_ground_truth:
        predictor = lambda s: s.image_gt  # noqa: E731
    else:
        checkpoint = args.checkpoint or _default_checkpoint()
        if checkpoint is None:
            raise ConfigError("no checkpoint given (use --checkpoint or DUALPAINT_CHECKPOINT_DIR)")
        predictor = load_generator(checkpoint)
    reports = evaluate(predictor, samples)
    table = render_table(reports)
    print(table)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(reports_to_json(reports))
        (out / "metrics.txt").write_text(table + "\n")
    return 0


def cmd_infer(args) -> int:
    checkpoint = args.checkpoint or _default_checkpoint()
    if checkpoint is None:
        raise ConfigError("no checkpoint given (use --checkpoint or DUALPAINT_CHECKPOINT_DIR)")
    from .data import load_image, load_mask  # local import keeps startup fast

    model = load_generator(checkpoint)
    image = load_image(args.image)
    mask = load_mask(args.mask)
    if mask.shape[-2:] != image.shape[-2:]:
        raise InputError(
            f"mask size {tuple(mask.shape[-2:])} != image size {tuple(image.shape[-2:])}"
        )
    comp, raw, edge = inpaint(model, image, mask)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(comp, out_dir / "composite.png")
    save_image(raw, out_dir / "output.png")
    save_mask(edge >= 0.5, out_dir / "edges.png")
    payload = load_checkpoint_payload(checkpoint)
    metadata = {
        "mask_ratio_percent": float((1.0 - mask).mean()) * 100.0,
        "model_version": f"dualpaint-{__version__}",
        "checkpoint_iteration": payload["iteration"],
    }
    (out_dir / "metadata.json").write_text(json.dumps(metadata, indent=2) + "\n")
    print(f"wrote composite.png, output.png, edges.png, metadata.json to {out_dir}")
    return 0


def cmd_synth_data(args) -> int:
    samples = synth_dataset(args.n, args.size, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, s in enumerate(samples):
        image_path = out_dir / f"image_{i:04d}.png"
        save_image(s.image_gt, image_path)
        save_mask(s.mask, out_dir / f"mask_{i:04d}.png")
        manifest.append(image_path.name)
    (out_dir / "manifest.txt").write_text("\n".join(manifest) + "\n")
    print(f"wrote {len(samples)} samples to {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    checkpoint = args.checkpoint or _default_checkpoint()
    if checkpoint is None:
        raise ConfigError("no checkpoint given (use --checkpoint or DUALPAINT_CHECKPOINT_DIR)")
    app = create_app(
        checkpoint_path=checkpoint,
        max_pixels=args.max_pixels,
        allow_origins=tuple(args.allow_origin),
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualpaint", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dualpaint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on synthetic or manifest data")
    _add_config_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-iters", type=int, help="shorthand for --set train.max_iters=N")
    p.add_argument(
        "--two-phase",
        action="store_true",
        help="run the initial phase then finetune_iters at the lower rate with frozen batch norm",
    )
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="per-bucket PSNR/SSIM table")
    _add_config_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir")
    p.add_argument(
        "--oracle-ground-truth",
        action="store_true",
        help="score the ground truth against itself (fixture)",
    )
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="inpaint one image with a mask file")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("synth-data", help="write a synthetic dataset to disk")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth_data)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--max-pixels", type=int, default=4_000_000)
    p.add_argument("--allow-origin", action="append", default=["*"])
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (InputError, CheckpointError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
