"""Two-branch Markovian discriminator with spectral-normalized convolutions.

The texture branch scores the RGB image; the structure branch scores the
edge map conditioned on the grayscale image (edges alone are too sparse to
drive the adversarial signal). Branch outputs are concatenated channel-wise
into a (B,2,h,w) patch score map in (0,1).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InputError

LEAKY_SLOPE = 0.2


def spectral_normalize(
    weight: torch.Tensor, u: torch.Tensor | None = None, n_power_iterations: int = 1
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Divide a weight by its power-iteration largest singular value.

    The weight is flattened to (out, rest). Returns (normalized weight,
    sigma estimate, updated left singular vector u). Gradients flow through
    the weight only; u and v are treated as constants.
    """
    w2d = weight.reshape(weight.shape[0], -1)
    if u is None:
        u = torch.ones(w2d.shape[0], dtype=weight.dtype, device=weight.device)
        u = u / u.norm()
    with torch.no_grad():
        v = u  # placeholder for scope
        for _ in range(max(1, n_power_iterations)):
            v = F.normalize(w2d.T @ u, dim=0, eps=1e-12)
            u = F.normalize(w2d @ v, dim=0, eps=1e-12)
    sigma = torch.dot(u, w2d @ v)
    return weight / sigma, sigma, u


class SNConv2d(nn.Module):
    """Conv2d whose weight is spectral-normalized with one power iteration
    per training-mode forward; the u vector persists in the state dict."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.weight = nn.Parameter(torch.empty(out_ch, in_ch, kernel, kernel))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        nn.init.kaiming_normal_(self.weight, a=LEAKY_SLOPE)
        u = F.normalize(torch.randn(out_ch), dim=0)
        self.register_buffer("u", u)

    def normalized_weight(self) -> torch.Tensor:
        w2d = self.weight.reshape(self.weight.shape[0], -1)
        with torch.no_grad():
            v = F.normalize(w2d.T @ self.u, dim=0, eps=1e-12)
            if self.training:
                self.u.copy_(F.normalize(w2d @ v, dim=0, eps=1e-12))
            # Clone so later in-place u updates cannot invalidate this graph.
            u = self.u.clone()
        sigma = torch.dot(u, w2d @ v)
        return self.weight / sigma

    def forward(self, x):
        return F.conv2d(x, self.normalized_weight(), self.bias, self.stride, self.padding)


class ResidualEdgeHead(nn.Module):
    """Residual block (projection shortcut) + 1x1 conv, lifting the sparse
    edge/gray pair into a dense 64-channel representation."""

    def __init__(self, in_ch: int = 2, channels: int = 64):
        super().__init__()
        self.conv1 = SNConv2d(in_ch, channels, 3, padding=1)
        self.conv2 = SNConv2d(channels, channels, 3, padding=1)
        self.shortcut = SNConv2d(in_ch, channels, 1)
        self.out = SNConv2d(channels, channels, 1)

    def forward(self, x):
        y = self.conv2(F.leaky_relu(self.conv1(x), LEAKY_SLOPE))
        y = F.leaky_relu(y + self.shortcut(x), LEAKY_SLOPE)
        return self.out(y)


def _branch(in_ch: int) -> nn.Sequential:
    # 3 stride-2 k4 convs then 2 stride-1 k4 convs; pad 1 throughout.
    plan = [(in_ch, 64, 2), (64, 128, 2), (128, 256, 2), (256, 256, 1)]
    layers: list[nn.Module] = []
    for cin, cout, stride in plan:
        layers += [SNConv2d(cin, cout, 4, stride=stride, padding=1), nn.LeakyReLU(LEAKY_SLOPE)]
    layers.append(SNConv2d(256, 1, 4, stride=1, padding=1))
    return nn.Sequential(*layers)


class TwoBranchDiscriminator(nn.Module):
    def __init__(self):
        super().__init__()
        self.texture_branch = _branch(3)
        self.edge_head = ResidualEdgeHead()
        self.structure_branch = _branch(64)

    def forward(self, image: torch.Tensor, edge: torch.Tensor, gray: torch.Tensor) -> torch.Tensor:
        if image.shape[1] != 3 or edge.shape[1] != 1 or gray.shape[1] != 1:
            raise InputError(
                f"expected (B,3,H,W)/(B,1,H,W)/(B,1,H,W), got {tuple(image.shape)}, "
                f"{tuple(edge.shape)}, {tuple(gray.shape)}"
            )
        t = self.texture_branch(image)
        s = self.structure_branch(self.edge_head(torch.cat([edge, gray], dim=1)))
        return torch.sigmoid(torch.cat([t, s], dim=1))

    def discriminate(self, image, edge, gray) -> torch.Tensor:
        return self.forward(image, edge, gray)
