"""Contextual feature aggregation: patch attention plus multi-scale refinement.

3x3 feature patches (stride 1, one patch per pixel, borders edge-replicated
so a constant map yields identical patches) are compared by cosine
similarity, softmax-normalized per query patch, and used to rebuild the
feature map by overlap-add with per-pixel coverage normalization, which
makes identity attention an exact fixed point. The rebuilt map is refined by
four dilated branches blended through learned pixel-wise simplex weights.
The whole block runs at half resolution between a strided conv and a
transposed conv, and needs no mask input.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InputError

PATCH_SIZE = 3
PATCH_PAD = 1
NORM_EPS = 1e-8
DILATION_RATES = (1, 2, 4, 8)

# Row-chunk size for the N x N attention product; bounds peak memory without
# changing results (softmax rows are independent).
ATTENTION_CHUNK = 4096


def _patches(f: torch.Tensor) -> torch.Tensor:
    """(B,C,H,W) -> (B, N, C*9) patch matrix, N = H*W, borders replicated."""
    padded = F.pad(f, (PATCH_PAD,) * 4, mode="replicate")
    return F.unfold(padded, PATCH_SIZE).transpose(1, 2)


def _coverage(f: torch.Tensor) -> torch.Tensor:
    """Per-pixel count of 3x3 patches covering each position."""
    ones = torch.ones_like(f)
    return F.fold(
        F.unfold(ones, PATCH_SIZE, padding=PATCH_PAD), f.shape[-2:], PATCH_SIZE, padding=PATCH_PAD
    )


def attention_scores(f: torch.Tensor) -> torch.Tensor:
    """Row-stochastic (N,N) patch-attention matrix for a (C,H,W) feature map."""
    if f.dim() != 3:
        raise InputError(f"expected (C,H,W), got {tuple(f.shape)}")
    p = _patches(f.unsqueeze(0))[0]
    pn = p / p.norm(dim=1, keepdim=True).clamp_min(NORM_EPS)
    return torch.softmax(pn @ pn.T, dim=1)


def reconstruct(f: torch.Tensor, s_hat: torch.Tensor) -> torch.Tensor:
    """Rebuild (C,H,W) from attention-weighted patches with overlap-add."""
    if f.dim() != 3:
        raise InputError(f"expected (C,H,W), got {tuple(f.shape)}")
    fb = f.unsqueeze(0)
    p = _patches(fb)[0]  # (N, C*9)
    rec = s_hat @ p
    folded = F.fold(rec.T.unsqueeze(0), fb.shape[-2:], PATCH_SIZE, padding=PATCH_PAD)
    return (folded / _coverage(fb))[0]


def _attend_batched(f: torch.Tensor, chunk: int = ATTENTION_CHUNK) -> torch.Tensor:
    """Attention + reconstruction for (B,C,H,W), chunked over query rows."""
    p = _patches(f)  # (B, N, K)
    pn = p / p.norm(dim=2, keepdim=True).clamp_min(NORM_EPS)
    n = p.shape[1]
    rows = []
    for start in range(0, n, chunk):
        scores = torch.softmax(pn[:, start : start + chunk] @ pn.transpose(1, 2), dim=2)
        rows.append(scores @ p)
    rec = torch.cat(rows, dim=1)
    folded = F.fold(rec.transpose(1, 2), f.shape[-2:], PATCH_SIZE, padding=PATCH_PAD)
    return folded / _coverage(f)


class MultiScaleAggregator(nn.Module):
    """Four dilated 3x3 branches blended by a learned per-pixel simplex."""

    def __init__(self, channels: int, rates: tuple[int, ...] = DILATION_RATES):
        super().__init__()
        if len(rates) != len(DILATION_RATES):
            raise InputError(f"expected {len(DILATION_RATES)} dilation rates, got {rates}")
        self.rates = tuple(rates)
        self.branches = nn.ModuleList(
            [nn.Conv2d(channels, channels, 3, dilation=k, padding=k) for k in self.rates]
        )
        self.weight_head = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(channels, len(self.rates), 1),
            nn.ReLU(),
        )

    def pixel_weights(self, f_rec: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.weight_head(f_rec), dim=1)

    def forward(self, f_rec: torch.Tensor) -> torch.Tensor:
        w = self.pixel_weights(f_rec)
        out = None
        for i, branch in enumerate(self.branches):
            term = branch(f_rec) * w[:, i : i + 1]
            out = term if out is None else out + term
        return out


def aggregate(f_rec: torch.Tensor, params: MultiScaleAggregator) -> torch.Tensor:
    if f_rec.dim() == 3:
        return params(f_rec.unsqueeze(0)).squeeze(0)
    return params(f_rec)


class ContextualAggregation(nn.Module):
    """Down 2x -> patch attention -> (multi-scale refine) -> up 2x -> skip merge."""

    def __init__(self, channels: int, multiscale: bool = True):
        super().__init__()
        self.channels = channels
        self.multiscale = multiscale
        self.down = nn.Conv2d(channels, channels, 3, stride=2, padding=1)
        self.aggregator = MultiScaleAggregator(channels) if multiscale else None
        self.up = nn.ConvTranspose2d(channels, channels, 4, stride=2, padding=1)
        self.merge = nn.Conv2d(2 * channels, channels, 1)

    def forward(self, f_in: torch.Tensor) -> torch.Tensor:
        if f_in.shape[1] != self.channels:
            raise InputError(f"expected {self.channels} channels, got {f_in.shape[1]}")
        h, w = f_in.shape[-2:]
        x = F.pad(f_in, (0, w % 2, 0, h % 2)) if (h % 2 or w % 2) else f_in
        x = self.down(x)
        x = _attend_batched(x)
        if self.aggregator is not None:
            x = self.aggregator(x)
        x = self.up(x)
        x = x[..., :h, :w]
        return self.merge(torch.cat([x, f_in], dim=1))


def cfa_forward(f_in: torch.Tensor, params: ContextualAggregation) -> torch.Tensor:
    if f_in.dim() == 3:
        return params(f_in.unsqueeze(0)).squeeze(0)
    return params(f_in)
