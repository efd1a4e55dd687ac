"""PSNR and SSIM reference implementations plus the per-bucket report table.

Both metrics accept torch tensors or numpy arrays shaped (C,H,W) or (H,W)
with values in [0,1]. SSIM follows the classic formulation: 11x11 Gaussian
window (sigma 1.5), k1=0.01, k2=0.03, computed on grayscale with 'valid'
windowing and averaged over window positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.signal import convolve2d

from .data import LUMA_WEIGHTS
from .errors import InputError

PSNR_CAP_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

COARSE_BUCKETS = ((0, 20), (20, 40), (40, 60))


@dataclass
class MetricReport:
    """Aggregated metrics for one coarse mask-ratio bucket."""

    bucket_lower: int
    bucket_upper: int
    psnr: float
    ssim: float
    n_samples: int

    @property
    def bucket_label(self) -> str:
        return f"{self.bucket_lower}-{self.bucket_upper}%"


def _as_numpy(x) -> np.ndarray:
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def _to_gray2d(x: np.ndarray) -> np.ndarray:
    if x.ndim == 2:
        return x
    if x.ndim == 3:
        if x.shape[0] == 1:
            return x[0]
        if x.shape[0] == 3:
            r, g, b = LUMA_WEIGHTS
            return r * x[0] + g * x[1] + b * x[2]
    raise InputError(f"expected (H,W), (1,H,W) or (3,H,W), got shape {x.shape}")


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 for identical inputs."""
    a, b = _as_numpy(a), _as_numpy(b)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def masked_psnr(a, b, mask, peak: float = 1.0) -> float:
    """PSNR restricted to pixels where ``mask == 0`` (the hole region)."""
    a, b, m = _as_numpy(a), _as_numpy(b), _as_numpy(mask)
    hole = np.broadcast_to(m, a.shape) < 0.5
    if not hole.any():
        return PSNR_CAP_DB
    mse = float(np.mean((a[hole] - b[hole]) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    w = np.outer(g1, g1)
    return w / w.sum()


def ssim(a, b) -> float:
    """Mean structural similarity over valid 11x11 window positions."""
    ga = _to_gray2d(_as_numpy(a))
    gb = _to_gray2d(_as_numpy(b))
    if ga.shape != gb.shape:
        raise InputError(f"shape mismatch: {ga.shape} vs {gb.shape}")
    if min(ga.shape) < SSIM_WINDOW:
        raise InputError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")

    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2

    mu_a = convolve2d(ga, w, mode="valid")
    mu_b = convolve2d(gb, w, mode="valid")
    var_a = convolve2d(ga * ga, w, mode="valid") - mu_a**2
    var_b = convolve2d(gb * gb, w, mode="valid") - mu_b**2
    cov = convolve2d(ga * gb, w, mode="valid") - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def coarse_bucket(hole_percent: float) -> tuple[int, int]:
    """Map a hole percentage onto the 0-20 / 20-40 / 40-60 report buckets."""
    idx = min(int(hole_percent // 20), len(COARSE_BUCKETS) - 1)
    return COARSE_BUCKETS[idx]


def reports_to_json(reports: list[MetricReport]) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2)


def render_table(reports: list[MetricReport]) -> str:
    """Aligned plain-text table: one column per coarse mask-ratio bucket."""
    by_bucket = {(r.bucket_lower, r.bucket_upper): r for r in reports}
    headers = [f"{lo}-{hi}%" for lo, hi in COARSE_BUCKETS]

    def row(name: str, fmt, attr: str) -> list[str]:
        cells = [name]
        for key in COARSE_BUCKETS:
            r = by_bucket.get(key)
            cells.append(fmt(getattr(r, attr)) if r and r.n_samples > 0 else "-")
        return cells

    rows = [
        ["Mask Ratio", *headers],
        row("PSNR", lambda v: f"{v:.2f}", "psnr"),
        row("SSIM", lambda v: f"{v:.4f}", "ssim"),
        row("N", str, "n_samples"),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)
