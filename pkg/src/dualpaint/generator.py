"""Two-stream partial-convolution generator with cross-stream feature borrowing.

The texture stream encodes the corrupted RGB image; the structure stream
encodes the corrupted edge map stacked with the corrupted grayscale. Each
decoder level consumes the upsampled deeper features together with the skip
features of BOTH encoders (cross borrowing), ending in two full-resolution
feature maps that are fused (gated fusion), refined (contextual
aggregation), and projected to the output image and edge map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import torch
import torch.nn.functional as F
from torch import nn

from .bigff import BiGFF
from .cfa import ContextualAggregation
from .data import Sample
from .errors import ConfigError, InputError
from .pconv import PartialConv2d

TEXTURE_IN_CHANNELS = 3   # corrupted RGB
STRUCTURE_IN_CHANNELS = 2  # corrupted edge map + corrupted grayscale


@dataclass
class GeneratorConfig:
    levels: int = 7
    base_channels: int = 64
    max_channels: int = 512
    feature_channels: int = 64  # width of the decoder outputs and fusion tail
    use_bigff: bool = True
    use_cfa: bool = True
    multiscale_cfa: bool = True
    two_stream: bool = True
    cross_borrow: bool = True
    batch_norm: bool = True
    width_multiplier: float = 1.0  # trunk widening for the single-stream ablation

    def validate(self) -> None:
        if self.levels < 3:
            raise ConfigError(f"levels must be >= 3, got {self.levels}")
        if self.base_channels < 1 or self.max_channels < self.base_channels:
            raise ConfigError("need 1 <= base_channels <= max_channels")
        if self.feature_channels < 1:
            raise ConfigError("feature_channels must be >= 1")
        if self.width_multiplier <= 0:
            raise ConfigError("width_multiplier must be positive")

    @classmethod
    def for_size(cls, size: int, **overrides) -> "GeneratorConfig":
        """Default depth for a square input: 7 levels at 256, 5 at 64."""
        levels = max(3, int(math.log2(size)) - 1)
        if 2**levels > size:
            raise ConfigError(f"size {size} too small for {levels} levels")
        return cls(levels=levels, **overrides)

    def channels(self, level: int) -> int:
        # Rounding per level keeps the width-multiplier parameter sweep fine
        # grained enough for the single-stream parity search.
        cap = max(1, round(self.max_channels * self.width_multiplier))
        width = max(1, round(self.base_channels * 2 ** (level - 1) * self.width_multiplier))
        return min(width, cap)

    def kernel(self, level: int) -> int:
        return 7 if level == 1 else 5 if level == 2 else 3

    def check_resolution(self, h: int, w: int) -> None:
        mult = 2**self.levels
        if h % mult or w % mult:
            raise InputError(f"resolution {h}x{w} not divisible by 2^levels = {mult}")
        if mult > min(h, w):
            raise InputError(f"2^levels = {mult} exceeds min spatial dim {min(h, w)}")


@dataclass
class StreamFeatures:
    """Per-level encoder features and masks for both streams."""

    texture_skips: list
    structure_skips: list
    texture_masks: list
    structure_masks: list
    f_t: torch.Tensor | None = None
    f_s: torch.Tensor | None = None

    @property
    def masks_per_level(self) -> list:
        return self.texture_masks


@dataclass
class GeneratorOutput:
    image_out: torch.Tensor    # (B,3,H,W) in [0,1]
    edge_out: torch.Tensor     # (B,1,H,W) in [0,1]
    edge_logits: torch.Tensor  # (B,1,H,W), pre-sigmoid
    rgb_preview: torch.Tensor  # (B,3,H,W) in [0,1], intermediate texture head
    f_t: torch.Tensor
    f_s: torch.Tensor


class _EncoderBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, use_bn: bool):
        super().__init__()
        self.conv = PartialConv2d(in_ch, out_ch, kernel, stride=2, padding=(kernel - 1) // 2)
        self.bn = nn.BatchNorm2d(out_ch) if use_bn else None
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x, mask):
        x, mask = self.conv(x, mask)
        if self.bn is not None:
            x = self.bn(x)
        return self.act(x), mask


class _DecoderBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, use_bn: bool):
        super().__init__()
        self.conv = PartialConv2d(in_ch, out_ch, 3, stride=1, padding=1)
        self.bn = nn.BatchNorm2d(out_ch) if use_bn else None
        self.act = nn.ReLU()

    def forward(self, x, mask):
        x, mask = self.conv(x, mask)
        if self.bn is not None:
            x = self.bn(x)
        return self.act(x), mask


class PConvEncoder(nn.Module):
    """Stride-2 partial-conv pyramid; batch norm on all but the first level."""

    def __init__(self, in_channels: int, cfg: GeneratorConfig):
        super().__init__()
        blocks = []
        for level in range(1, cfg.levels + 1):
            in_ch = in_channels if level == 1 else cfg.channels(level - 1)
            blocks.append(
                _EncoderBlock(in_ch, cfg.channels(level), cfg.kernel(level), cfg.batch_norm and level > 1)
            )
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x, mask):
        feats, masks = [], []
        for block in self.blocks:
            x, mask = block(x, mask)
            feats.append(x)
            masks.append(mask)
        return feats, masks


class PConvDecoder(nn.Module):
    """Nearest-upsample + stride-1 partial-conv pyramid with skip concatenation.

    With borrowing enabled every level also concatenates the opposite
    encoder's skip; the full-resolution level concatenates the stream's raw
    input instead of encoder features.
    """

    def __init__(self, cfg: GeneratorConfig, raw_channels: int, borrow: bool):
        super().__init__()
        self.levels = cfg.levels
        self.borrow = borrow
        blocks = []
        cur = cfg.channels(cfg.levels)
        for level in range(cfg.levels, 0, -1):
            if level >= 2:
                skip = cfg.channels(level - 1) * (2 if borrow else 1)
                out = cfg.channels(level - 1)
            else:
                skip = raw_channels
                out = cfg.feature_channels
            blocks.append(_DecoderBlock(cur + skip, out, cfg.batch_norm and level > 1))
            cur = out
        self.blocks = nn.ModuleList(blocks)

    def forward(self, own_feats, own_masks, other_feats, raw, raw_mask):
        x, mask = own_feats[-1], own_masks[-1]
        for i, level in enumerate(range(self.levels, 0, -1)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            mask = F.interpolate(mask, scale_factor=2, mode="nearest")
            if level >= 2:
                skips = [own_feats[level - 2]]
                if self.borrow:
                    skips.append(other_feats[level - 2])
                skip_mask = own_masks[level - 2]
            else:
                skips = [raw]
                skip_mask = raw_mask
            x = torch.cat([x, *skips], dim=1)
            mask = torch.maximum(mask, skip_mask)
            x, mask = self.blocks[i](x, mask)
        return x


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class ProjectionHead(nn.Module):
    """Residual block followed by a conv; optional sigmoid squash to [0,1]."""

    def __init__(self, in_channels: int, out_channels: int, squash: bool):
        super().__init__()
        self.res = ResidualBlock(in_channels)
        self.out = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.squash = squash

    def forward(self, x):
        y = self.out(self.res(x))
        return torch.sigmoid(y) if self.squash else y


class SimpleFusion(nn.Module):
    """Concat + conv stand-in used when gated fusion is disabled."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(2 * channels, 2 * channels, 3, padding=1)

    def forward(self, f_t, f_s):
        return self.conv(torch.cat([f_s, f_t], dim=1))


class _GeneratorBase(nn.Module):
    """Shared fusion tail and output heads."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        cfg.validate()
        self.config = cfg
        c = cfg.feature_channels
        self.texture_head = ProjectionHead(c, 3, squash=True)     # intermediate RGB
        self.structure_head = ProjectionHead(c, 1, squash=False)  # edge logits
        self.fusion = BiGFF(c) if cfg.use_bigff else SimpleFusion(c)
        self.cfa = ContextualAggregation(2 * c, cfg.multiscale_cfa) if cfg.use_cfa else None
        tail_ch = 4 * c if cfg.use_cfa else 2 * c
        self.image_head = ProjectionHead(tail_ch, 3, squash=True)

    def _finish(self, f_t, f_s) -> GeneratorOutput:
        rgb_preview = self.texture_head(f_t)
        edge_logits = self.structure_head(f_s)
        fused = self.fusion(f_t, f_s)
        if self.cfa is not None:
            tail = torch.cat([self.cfa(fused), fused], dim=1)
        else:
            tail = fused
        return GeneratorOutput(
            image_out=self.image_head(tail),
            edge_out=torch.sigmoid(edge_logits),
            edge_logits=edge_logits,
            rgb_preview=rgb_preview,
            f_t=f_t,
            f_s=f_s,
        )


class TwoStreamGenerator(_GeneratorBase):
    def __init__(self, cfg: GeneratorConfig):
        if not cfg.two_stream:
            raise ConfigError("config requests single-stream; build SingleStreamGenerator")
        super().__init__(cfg)
        self.texture_encoder = PConvEncoder(TEXTURE_IN_CHANNELS, cfg)
        self.structure_encoder = PConvEncoder(STRUCTURE_IN_CHANNELS, cfg)
        self.texture_decoder = PConvDecoder(cfg, TEXTURE_IN_CHANNELS, cfg.cross_borrow)
        self.structure_decoder = PConvDecoder(cfg, STRUCTURE_IN_CHANNELS, cfg.cross_borrow)

    def encode(self, image_in, edge_in, gray_in, mask) -> StreamFeatures:
        self.config.check_resolution(*image_in.shape[-2:])
        t_feats, t_masks = self.texture_encoder(image_in, mask)
        s_feats, s_masks = self.structure_encoder(torch.cat([edge_in, gray_in], dim=1), mask)
        return StreamFeatures(t_feats, s_feats, t_masks, s_masks)

    def decode(self, feats: StreamFeatures, image_in, edge_in, gray_in, mask):
        f_t = self.texture_decoder(
            feats.texture_skips, feats.texture_masks, feats.structure_skips, image_in, mask
        )
        f_s = self.structure_decoder(
            feats.structure_skips,
            feats.structure_masks,
            feats.texture_skips,
            torch.cat([edge_in, gray_in], dim=1),
            mask,
        )
        feats.f_t, feats.f_s = f_t, f_s
        return f_t, f_s

    def forward(self, image_in, edge_in, gray_in, mask) -> GeneratorOutput:
        feats = self.encode(image_in, edge_in, gray_in, mask)
        f_t, f_s = self.decode(feats, image_in, edge_in, gray_in, mask)
        return self._finish(f_t, f_s)


class SingleStreamGenerator(_GeneratorBase):
    """Multi-task ablation: one widened trunk tailed by texture/structure branches."""

    IN_CHANNELS = TEXTURE_IN_CHANNELS + STRUCTURE_IN_CHANNELS

    def __init__(self, cfg: GeneratorConfig):
        if cfg.two_stream:
            raise ConfigError("config requests two-stream; build TwoStreamGenerator")
        super().__init__(cfg)
        self.encoder = PConvEncoder(self.IN_CHANNELS, cfg)
        self.decoder = PConvDecoder(cfg, self.IN_CHANNELS, borrow=False)
        c = cfg.feature_channels
        self.texture_branch = nn.Conv2d(c, c, 3, padding=1)
        self.structure_branch = nn.Conv2d(c, c, 3, padding=1)

    def forward(self, image_in, edge_in, gray_in, mask) -> GeneratorOutput:
        self.config.check_resolution(*image_in.shape[-2:])
        x = torch.cat([image_in, edge_in, gray_in], dim=1)
        feats, masks = self.encoder(x, mask)
        f = self.decoder(feats, masks, feats, x, mask)
        return self._finish(self.texture_branch(f), self.structure_branch(f))


def build_generator(cfg: GeneratorConfig) -> nn.Module:
    return TwoStreamGenerator(cfg) if cfg.two_stream else SingleStreamGenerator(cfg)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def matched_width_multiplier(cfg: GeneratorConfig, tolerance: float = 0.02) -> float:
    """Trunk widening that puts the single-stream ablation's parameter count
    within the given relative tolerance of the two-stream model."""
    with torch.device("meta"):
        target = count_parameters(TwoStreamGenerator(replace(cfg, two_stream=True)))

        def params_at(m: float) -> int:
            c = replace(cfg, two_stream=False, width_multiplier=m)
            return count_parameters(SingleStreamGenerator(c))

        lo, hi = 0.5, 4.0
        for _ in range(50):
            mid = (lo + hi) / 2
            if params_at(mid) < target:
                lo = mid
            else:
                hi = mid
        best = min((lo, hi), key=lambda m: abs(params_at(m) - target))
        err = abs(params_at(best) - target) / target
    if err > tolerance:
        raise ConfigError(f"no multiplier matches parameter count within {tolerance:.0%}")
    return best


def composite(image_out: torch.Tensor, image_gt: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Known pixels from the ground truth, hole pixels from the generator."""
    return image_gt * mask + image_out * (1.0 - mask)


def _batch(sample: Sample) -> tuple[torch.Tensor, ...]:
    return (
        sample.image_in.unsqueeze(0),
        sample.edge_in.unsqueeze(0),
        sample.gray_in.unsqueeze(0),
        sample.mask.unsqueeze(0),
    )


def generate(model: nn.Module, sample: Sample) -> tuple[torch.Tensor, torch.Tensor]:
    """Deterministic eval-mode forward for one sample; returns (I_out, E_out)."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(*_batch(sample))
    finally:
        model.train(was_training)
    return out.image_out[0], out.edge_out[0]


def _pad_to_multiple(x: torch.Tensor, mult: int) -> torch.Tensor:
    h, w = x.shape[-2:]
    pad_h = (-h) % mult
    pad_w = (-w) % mult
    if pad_h == 0 and pad_w == 0:
        return x
    out = x.unsqueeze(0)
    while pad_h > 0 or pad_w > 0:
        step_h = min(pad_h, out.shape[-2] - 1)
        step_w = min(pad_w, out.shape[-1] - 1)
        out = F.pad(out, (0, step_w, 0, step_h), mode="replicate")
        pad_h -= step_h
        pad_w -= step_w
    return out.squeeze(0)


def inpaint(
    model: nn.Module, image: torch.Tensor, mask: torch.Tensor, **edge_kwargs
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Full-pipeline inference on an arbitrary-size image.

    Pads to the model's resolution multiple, derives edges/grayscale, runs
    the generator, crops back, and composites so known pixels pass through
    exactly. Returns (composite, raw output, edge map), each at input size.
    """
    h, w = image.shape[-2:]
    mult = 2**model.config.levels
    padded_image = _pad_to_multiple(image, mult)
    padded_mask = _pad_to_multiple(mask, mult)
    sample = Sample.create(padded_image, padded_mask, **edge_kwargs)
    image_out, edge_out = generate(model, sample)
    image_out = image_out[..., :h, :w]
    edge_out = edge_out[..., :h, :w]
    return composite(image_out, image, mask), image_out, edge_out
