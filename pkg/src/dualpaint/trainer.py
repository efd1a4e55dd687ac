"""Two-phase adversarial training loop, checkpointing, and evaluation.

One discriminator update (on detached fakes) then one generator update per
batch. The finetune phase drops the learning rate and freezes every batch
norm in the generator (eval mode + no gradient on the affine parameters).
Runs are deterministic under a fixed seed: batch order comes from a private
numpy generator and all torch RNG state is seeded and checkpointed.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .config import DataConfig, RunConfig, TrainConfig
from .data import SYNTH_BUCKETS, Sample, make_mask, make_sample, read_manifest, synth_dataset, to_grayscale
from .errors import CheckpointError, NumericError
from .generator import GeneratorConfig, build_generator, composite, generate
from .losses import (
    LossWeights,
    RandomFeatureExtractor,
    discriminator_loss,
    generator_adversarial_loss,
    intermediate_loss,
    joint_loss,
    perceptual_loss,
    reconstruction_loss,
    style_loss,
)
from .metrics import MetricReport, coarse_bucket, masked_psnr, psnr, ssim
from .discriminator import TwoBranchDiscriminator

CHECKPOINT_VERSION = 1


def collate(samples: list[Sample]) -> dict[str, torch.Tensor]:
    keys = ("image_gt", "edge_gt", "gray_gt", "mask", "image_in", "edge_in", "gray_in")
    return {k: torch.stack([getattr(s, k) for s in samples]) for k in keys}


def freeze_batch_norm(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.BatchNorm2d):
            m.eval()
            m.weight.requires_grad_(False)
            m.bias.requires_grad_(False)


def load_dataset(cfg: DataConfig) -> list[Sample]:
    if cfg.source == "synthetic":
        return synth_dataset(cfg.n_samples, cfg.size, cfg.seed)
    paths = read_manifest(cfg.source)[: cfg.n_samples]
    rng = np.random.default_rng(cfg.seed)
    mask_paths = sorted(Path(cfg.masks_dir).glob("*.png")) if cfg.masks_dir else None
    samples = []
    for i, path in enumerate(paths):
        if mask_paths:
            mask_source = mask_paths[i % len(mask_paths)]
        else:
            mask_source = make_mask(rng, cfg.size, SYNTH_BUCKETS[i % len(SYNTH_BUCKETS)])
        samples.append(make_sample(path, mask_source, target_size=cfg.size))
    return samples


class Trainer:
    def __init__(self, config: RunConfig, out_dir=None, dataset: list[Sample] | None = None):
        config.validate()
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        torch.manual_seed(config.train.seed)
        self.dataset = dataset if dataset is not None else load_dataset(config.data)
        holdout = config.data.holdout if dataset is None else 0
        split = len(self.dataset) - holdout
        self.train_set = self.dataset[:split]
        self.holdout_set = self.dataset[split:]

        self.generator = build_generator(config.model)
        self.discriminator = TwoBranchDiscriminator()
        self.extractor = RandomFeatureExtractor(seed=config.train.seed)
        self.weights = config.loss
        self.iteration = 0
        self.last_checkpoint: Path | None = None
        self.data_rng = np.random.default_rng(config.train.seed)
        self._build_optimizers()

    # -- phase / optimizer plumbing --------------------------------------

    def _build_optimizers(self) -> None:
        tc = self.config.train
        self.opt_g = torch.optim.Adam(
            self.generator.parameters(), lr=tc.generator_lr, betas=(tc.beta1, tc.beta2)
        )
        self.opt_d = torch.optim.Adam(
            self.discriminator.parameters(), lr=tc.discriminator_lr, betas=(tc.beta1, tc.beta2)
        )

    @property
    def phase(self) -> str:
        return self.config.train.phase

    def set_phase(self, phase: str) -> None:
        self.config.train = replace(self.config.train, phase=phase)
        self.config.train.validate()
        for group in self.opt_g.param_groups:
            group["lr"] = self.config.train.generator_lr
        for group in self.opt_d.param_groups:
            group["lr"] = self.config.train.discriminator_lr

    def _set_train_mode(self) -> None:
        self.generator.train()
        self.discriminator.train()
        if self.phase == "finetune":
            freeze_batch_norm(self.generator)

    # -- core loop --------------------------------------------------------

    def _check_finite(self, name: str, value: float, diagnostics: dict) -> None:
        if not np.isfinite(value):
            ref = f" last good checkpoint: {self.last_checkpoint}" if self.last_checkpoint else ""
            raise NumericError(
                f"non-finite {name} at iteration {self.iteration}: {value!r}; "
                f"diagnostics: {json.dumps(diagnostics)};{ref}"
            )

    def sample_batch(self) -> dict[str, torch.Tensor]:
        n = min(self.config.train.batch_size, len(self.train_set))
        idx = self.data_rng.choice(len(self.train_set), size=n, replace=False)
        return collate([self.train_set[i] for i in idx])

    def train_step(self, batch: dict[str, torch.Tensor]) -> dict:
        self._set_train_mode()
        tc = self.config.train
        out = self.generator(batch["image_in"], batch["edge_in"], batch["gray_in"], batch["mask"])
        comp = composite(out.image_out, batch["image_gt"], batch["mask"])
        real = (batch["image_gt"], batch["edge_gt"], batch["gray_gt"])
        fake = (out.image_out, out.edge_out, to_grayscale(comp))

        adversarial_on = self.weights.adv > 0
        if adversarial_on:
            d_real = self.discriminator(*real)
            d_fake = self.discriminator(*(t.detach() for t in fake))
            loss_d = discriminator_loss(d_real, d_fake)
            self._check_finite("discriminator loss", float(loss_d.detach()), {})
            self.opt_d.zero_grad()
            loss_d.backward()
            self.opt_d.step()
            adv_g = generator_adversarial_loss(self.discriminator(*fake))
        else:
            loss_d = torch.zeros(())
            adv_g = torch.zeros(())

        rec = reconstruction_loss(out.image_out, batch["image_gt"])
        perc = perceptual_loss(out.image_out, batch["image_gt"], self.extractor)
        style = style_loss(out.image_out, batch["image_gt"], self.extractor)
        inter = intermediate_loss(
            out.edge_logits, out.rgb_preview, batch["edge_gt"], batch["image_gt"]
        )
        total = joint_loss(rec, perc, style, adv_g, inter, self.weights)

        record = {
            "iteration": self.iteration,
            "phase": self.phase,
            "loss_joint": float(total.detach()),
            "loss_rec": float(rec.detach()),
            "loss_perc": float(perc.detach()),
            "loss_style": float(style.detach()),
            "loss_adv_g": float(adv_g.detach()),
            "loss_inter": float(inter.detach()),
            "loss_d": float(loss_d.detach()),
            "lr_g": tc.generator_lr,
            "lr_d": tc.discriminator_lr,
            "mask_coverage": float(batch["mask"].mean()),
        }
        self._check_finite("joint loss", record["loss_joint"], record)

        self.opt_g.zero_grad()
        total.backward()
        self.opt_g.step()
        self.iteration += 1
        return record

    def train_two_phase(self, log_path=None) -> list[dict]:
        """Initial phase for max_iters, then finetune_iters at the lower
        rate with the generator's batch norm frozen."""
        history = self.train(log_path=log_path)
        if self.config.train.finetune_iters > 0:
            self.set_phase("finetune")
            history += self.train(self.config.train.finetune_iters, log_path=log_path)
        return history

    def train(self, max_iters: int | None = None, log_path=None) -> list[dict]:
        tc = self.config.train
        n_iters = tc.max_iters if max_iters is None else max_iters
        log_file = open(log_path, "a") if log_path is not None else None
        history = []
        try:
            for _ in range(n_iters):
                record = self.train_step(self.sample_batch())
                history.append(record)
                if log_file is not None and record["iteration"] % tc.log_every == 0:
                    log_file.write(json.dumps(record) + "\n")
                if (
                    self.out_dir is not None
                    and tc.checkpoint_every
                    and record["iteration"] % tc.checkpoint_every == 0
                ):
                    self.save_checkpoint(self.out_dir / "checkpoint.pt")
            if self.out_dir is not None:
                self.save_checkpoint(self.out_dir / "checkpoint.pt")
        finally:
            if log_file is not None:
                log_file.close()
        return history

    # -- evaluation helpers ------------------------------------------------

    def hole_l1(self, samples: list[Sample]) -> float:
        """Mean absolute error over hole pixels of the raw generator output."""
        total, count = 0.0, 0
        for s in samples:
            image_out, _ = generate(self.generator, s)
            hole = 1.0 - s.mask
            total += float(((image_out - s.image_gt).abs() * hole).sum())
            count += float(hole.sum()) * 3
        return total / max(count, 1)

    # -- checkpointing ------------------------------------------------------

    def checkpoint_payload(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "model_config": asdict(self.config.model),
            "train_config": asdict(self.config.train),
            "data_config": asdict(self.config.data),
            "loss_weights": asdict(self.weights),
            "phase": self.phase,
            "iteration": self.iteration,
            "generator": self.generator.state_dict(),
            "discriminator": self.discriminator.state_dict(),
            "opt_g": self.opt_g.state_dict(),
            "opt_d": self.opt_d.state_dict(),
            "torch_rng": torch.get_rng_state(),
            "data_rng": self.data_rng.bit_generator.state,
        }

    def save_checkpoint(self, path) -> Path:
        # Serialize into memory first: the archive's internal prefix then
        # stays filename-independent, so identical states give identical bytes.
        buffer = io.BytesIO()
        torch.save(self.checkpoint_payload(), buffer)
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(buffer.getvalue())
        os.replace(tmp, path)
        self.last_checkpoint = path
        return path

    @classmethod
    def from_checkpoint(cls, path, dataset: list[Sample] | None = None) -> "Trainer":
        payload = load_checkpoint_payload(path)
        config = RunConfig(
            data=DataConfig(**payload["data_config"]),
            model=GeneratorConfig(**payload["model_config"]),
            train=TrainConfig(**payload["train_config"]),
            loss=LossWeights(**payload["loss_weights"]),
        )
        trainer = cls(config, dataset=dataset)
        trainer.generator.load_state_dict(payload["generator"])
        trainer.discriminator.load_state_dict(payload["discriminator"])
        trainer.opt_g.load_state_dict(payload["opt_g"])
        trainer.opt_d.load_state_dict(payload["opt_d"])
        trainer.iteration = payload["iteration"]
        torch.set_rng_state(payload["torch_rng"])
        trainer.data_rng.bit_generator.state = payload["data_rng"]
        return trainer


def load_checkpoint_payload(path) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    except Exception as e:
        raise CheckpointError(f"cannot load checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or "version" not in payload:
        raise CheckpointError(f"malformed checkpoint {path}: missing version field")
    if payload["version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {payload['version']} != supported {CHECKPOINT_VERSION}"
        )
    return payload


def load_generator(path) -> nn.Module:
    """Rebuild the generator alone from a checkpoint (for infer/serve)."""
    payload = load_checkpoint_payload(path)
    model = build_generator(GeneratorConfig(**payload["model_config"]))
    model.load_state_dict(payload["generator"])
    model.eval()
    return model


def evaluate(predictor, samples: list[Sample], composited: bool = True) -> list[MetricReport]:
    """PSNR/SSIM grouped into the 0-20 / 20-40 / 40-60 buckets.

    ``predictor`` is either a generator module or a callable mapping a
    Sample to the predicted full image. Scores are computed on the
    composite (known pixels restored) by default; ``composited=False``
    scores the raw prediction instead.
    """
    if isinstance(predictor, nn.Module):
        model = predictor
        predictor = lambda s: generate(model, s)[0]  # noqa: E731
    grouped: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for sample in samples:
        image_out = predictor(sample)
        scored = composite(image_out, sample.image_gt, sample.mask) if composited else image_out
        key = coarse_bucket(sample.hole_percent)
        grouped.setdefault(key, []).append((psnr(scored, sample.image_gt), ssim(scored, sample.image_gt)))
    reports = []
    for (lo, hi), values in sorted(grouped.items()):
        reports.append(
            MetricReport(
                bucket_lower=lo,
                bucket_upper=hi,
                psnr=float(np.mean([v[0] for v in values])),
                ssim=float(np.mean([v[1] for v in values])),
                n_samples=len(values),
            )
        )
    return reports


def masked_psnr_gain(model: nn.Module, samples: list[Sample]) -> tuple[float, float]:
    """(model composite, zero-filled baseline) hole-region PSNR averages."""
    model_vals, baseline_vals = [], []
    for s in samples:
        image_out, _ = generate(model, s)
        comp = composite(image_out, s.image_gt, s.mask)
        model_vals.append(masked_psnr(comp, s.image_gt, s.mask))
        baseline_vals.append(masked_psnr(s.image_in, s.image_gt, s.mask))
    return float(np.mean(model_vals)), float(np.mean(baseline_vals))
