"""The five training losses and their weighted joint objective.

All expectations are per-element means. The feature extractor backing the
perceptual and style terms is frozen; the desk-scale default is a fixed,
seeded, randomly initialized 3-stage conv-pool network, with an adapter for
loading pretrained VGG-16 weights when a weight archive is available.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError

LOG_CLAMP = 1e-8


@dataclass
class LossWeights:
    rec: float = 10.0
    perc: float = 0.1
    style: float = 250.0
    adv: float = 0.1
    inter: float = 1.0

    def validate(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ConfigError(f"loss weight {name} must be >= 0, got {value}")


class RandomFeatureExtractor(nn.Module):
    """Frozen 3-stage conv-pool feature pyramid with seeded random weights.

    Random fixed features still define a valid metric, which keeps the
    perceptual/style terms self-contained at desk scale.
    """

    STAGE_CHANNELS = (16, 32, 64)

    def __init__(self, in_channels: int = 3, seed: int = 0):
        super().__init__()
        stages = []
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            cin = in_channels
            for cout in self.STAGE_CHANNELS:
                stages.append(
                    nn.Sequential(
                        nn.Conv2d(cin, cout, 3, padding=1),
                        nn.ReLU(),
                        nn.Conv2d(cout, cout, 3, padding=1),
                        nn.ReLU(),
                        nn.MaxPool2d(2),
                    )
                )
                cin = cout
        self.stages = nn.ModuleList(stages)
        self.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):
        return super().train(False)  # always frozen

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        activations = []
        for stage in self.stages:
            x = stage(x)
            activations.append(x)
        return activations


class VGGFeatureExtractor(nn.Module):
    """Adapter exposing pool-1/2/3 activations of a VGG-16 weight archive."""

    # (out_channels, convs per block) for the first three VGG-16 blocks.
    BLOCKS = ((64, 2), (128, 2), (256, 3))

    def __init__(self, state_dict_path):
        super().__init__()
        stages = []
        cin = 3
        for cout, n_convs in self.BLOCKS:
            layers: list[nn.Module] = []
            for _ in range(n_convs):
                layers += [nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU()]
                cin = cout
            layers.append(nn.MaxPool2d(2))
            stages.append(nn.Sequential(*layers))
        self.stages = nn.ModuleList(stages)
        state = torch.load(state_dict_path, map_location="cpu", weights_only=True)
        own = self.state_dict()
        remapped = {k: v for k, v in state.items() if k in own and own[k].shape == v.shape}
        if len(remapped) < len(own):
            raise ConfigError(
                f"extractor archive covers {len(remapped)}/{len(own)} tensors; "
                "expected conv weights named like the module tree"
            )
        self.load_state_dict(remapped)
        self.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):
        return super().train(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        activations = []
        for stage in self.stages:
            x = stage(x)
            activations.append(x)
        return activations


def reconstruction_loss(image_out: torch.Tensor, image_gt: torch.Tensor) -> torch.Tensor:
    return (image_out - image_gt).abs().mean()


def perceptual_loss(image_out, image_gt, extractor) -> torch.Tensor:
    total = None
    for fa, fb in zip(extractor(image_out), extractor(image_gt)):
        term = (fa - fb).abs().mean()
        total = term if total is None else total + term
    return total


def gram_matrix(activation: torch.Tensor) -> torch.Tensor:
    """(B,C,H,W) -> (B,C,C) channel Gram, normalized by C*H*W."""
    b, c, h, w = activation.shape
    flat = activation.reshape(b, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def style_loss(image_out, image_gt, extractor) -> torch.Tensor:
    total = None
    for fa, fb in zip(extractor(image_out), extractor(image_gt)):
        term = (gram_matrix(fa) - gram_matrix(fb)).abs().mean()
        total = term if total is None else total + term
    return total


def _log(scores: torch.Tensor) -> torch.Tensor:
    return torch.log(scores.clamp_min(LOG_CLAMP))


def discriminator_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """-E[log D(real)] - E[log(1 - D(fake))]; fakes must be detached upstream."""
    return -_log(real_scores).mean() - _log(1.0 - fake_scores).mean()


def generator_adversarial_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator objective: -E[log D(fake)]."""
    return -_log(fake_scores).mean()


def adversarial_losses(discriminator, real_triple, fake_triple):
    """(L_D, L_G) for (image, edge, gray) triples; L_D sees detached fakes."""
    real_scores = discriminator(*real_triple)
    fake_detached = discriminator(*(t.detach() for t in fake_triple))
    loss_d = discriminator_loss(real_scores, fake_detached)
    loss_g = generator_adversarial_loss(discriminator(*fake_triple))
    return loss_d, loss_g


def intermediate_loss(
    edge_logits: torch.Tensor,
    rgb_preview: torch.Tensor,
    edge_gt: torch.Tensor,
    image_gt: torch.Tensor,
) -> torch.Tensor:
    """BCE on the structure head's logits plus L1 on the texture head's RGB."""
    structure = F.binary_cross_entropy_with_logits(edge_logits, edge_gt)
    texture = (rgb_preview - image_gt).abs().mean()
    return structure + texture


def joint_loss(
    rec: torch.Tensor,
    perc: torch.Tensor,
    style: torch.Tensor,
    adv_g: torch.Tensor,
    inter: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    return (
        weights.rec * rec
        + weights.perc * perc
        + weights.style * style
        + weights.adv * adv_g
        + weights.inter * inter
    )
