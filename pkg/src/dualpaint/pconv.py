"""Partial convolution with the mask-update mechanism.

Output windows are renormalized over known pixels only: where the window
contains any known pixel, y = W^T(x * m) * (|window| / sum_m) + b and the
output pixel is marked known; windows with no known pixel produce exactly 0
and stay unknown. The mask is single-channel, broadcast across input
channels, so the channel-inclusive window count cancels against the channel
factor in sum_m. |window| counts in-image positions (k*k in the interior,
fewer where zero padding overhangs the border), which makes the layer reduce
exactly to a vanilla convolution under an all-ones mask.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InputError


class PartialConv2d(nn.Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        super().__init__()
        if kernel_size < 1:
            raise InputError(f"kernel_size must be >= 1, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, kernel_size, kernel_size))
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None
        nn.init.kaiming_normal_(self.weight, a=0.2)
        # Fixed all-ones kernel that counts known pixels per window; not trained.
        self.register_buffer("window_counter", torch.ones(1, 1, kernel_size, kernel_size))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise InputError(
                f"expected input of shape (B,{self.in_channels},H,W), got {tuple(x.shape)}"
            )
        if mask.dim() != 4 or mask.shape[1] != 1 or mask.shape[-2:] != x.shape[-2:]:
            raise InputError(
                f"expected mask of shape (B,1,H,W) matching input, got {tuple(mask.shape)}"
            )
        mask = mask.detach()

        with torch.no_grad():
            counter = self.window_counter.to(dtype=x.dtype)
            window_sum = F.conv2d(
                mask.to(dtype=x.dtype), counter, stride=self.stride, padding=self.padding
            )
            window_size = F.conv2d(
                torch.ones_like(mask, dtype=x.dtype), counter, stride=self.stride, padding=self.padding
            )
            valid = window_sum > 0
            new_mask = valid.to(dtype=x.dtype)
            # |window| / sum_m on valid windows; the invalid branch is zeroed below.
            scale = torch.where(
                valid, window_size / window_sum.clamp(min=1e-12), torch.zeros_like(window_sum)
            )

        y = F.conv2d(x * mask, self.weight, bias=None, stride=self.stride, padding=self.padding)
        y = y * scale
        if self.bias is not None:
            y = y + self.bias.view(1, -1, 1, 1) * new_mask
        return y, new_mask

    def extra_repr(self) -> str:
        return (
            f"{self.in_channels}, {self.out_channels}, kernel_size={self.kernel_size}, "
            f"stride={self.stride}, padding={self.padding}, bias={self.bias is not None}"
        )


def mask_coverage(mask: torch.Tensor) -> float:
    """Fraction of known pixels; monitors hole shrinkage across layers."""
    return float(mask.detach().mean())
