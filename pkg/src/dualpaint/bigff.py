"""Bi-directional gated feature fusion of the texture and structure streams.

Each direction computes a sigmoid gate from the concatenated features and
adds the gated opposite-stream content through a scalar blend parameter that
starts at exactly zero, so at initialization the fusion is plain channel
concatenation (structure half first, texture half second).
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import InputError


class BiGFF(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        # Gate convs see both streams (2C) and emit per-channel, per-pixel gates (C).
        self.texture_gate = nn.Conv2d(2 * channels, channels, 3, padding=1)
        self.structure_gate = nn.Conv2d(2 * channels, channels, 3, padding=1)
        # Blend scalars start at zero: identity fusion at init.
        self.texture_blend = nn.Parameter(torch.zeros(()))
        self.structure_blend = nn.Parameter(torch.zeros(()))

    def forward(self, f_t: torch.Tensor, f_s: torch.Tensor) -> torch.Tensor:
        if f_t.shape != f_s.shape:
            raise InputError(f"stream shape mismatch: {tuple(f_t.shape)} vs {tuple(f_s.shape)}")
        if f_t.shape[1] != self.channels:
            raise InputError(f"expected {self.channels} channels, got {f_t.shape[1]}")
        both = torch.cat([f_t, f_s], dim=1)
        gate_t = torch.sigmoid(self.texture_gate(both))
        f_s_fused = self.texture_blend * (gate_t * f_t) + f_s
        gate_s = torch.sigmoid(self.structure_gate(both))
        f_t_fused = self.structure_blend * (gate_s * f_s) + f_t
        return torch.cat([f_s_fused, f_t_fused], dim=1)


def fuse(f_t: torch.Tensor, f_s: torch.Tensor, params: BiGFF) -> torch.Tensor:
    """Functional alias; unbatched (C,H,W) inputs are batched transparently."""
    if f_t.dim() == 3:
        return params(f_t.unsqueeze(0), f_s.unsqueeze(0)).squeeze(0)
    return params(f_t, f_s)
