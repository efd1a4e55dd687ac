"""Canny edge extraction used to derive the structure stream's edge maps.

Gaussian smoothing, Sobel gradients, quantized-direction non-maximum
suppression, then hysteresis. The low/high thresholds are fractions of the
maximum gradient magnitude, which keeps the defaults meaningful for [0,1]
images regardless of gradient-operator scaling.
"""

from __future__ import annotations

import numpy as np
import torch
from scipy import ndimage

from .errors import ConfigError, InputError

DEFAULT_SIGMA = 2.0
DEFAULT_LOW = 0.1
DEFAULT_HIGH = 0.2


def canny(gray: np.ndarray, sigma: float, low: float, high: float) -> np.ndarray:
    """Binary edge map of a 2D grayscale array in [0,1]."""
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if not (0 <= low < high):
        raise ConfigError(f"need 0 <= low < high, got low={low} high={high}")
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise InputError(f"expected 2D grayscale array, got shape {gray.shape}")

    smoothed = ndimage.gaussian_filter(gray, sigma)
    gx = ndimage.sobel(smoothed, axis=1)
    gy = ndimage.sobel(smoothed, axis=0)
    mag = np.hypot(gx, gy)
    if mag.max() <= 0:
        return np.zeros_like(gray)

    # Non-maximum suppression with gradient direction quantized to 4 bins.
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    padded = np.pad(mag, 1)

    def shifted(dr: int, dc: int) -> np.ndarray:
        h, w = mag.shape
        return padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    horiz = (angle < 22.5) | (angle >= 157.5)
    diag_dr = (angle >= 22.5) & (angle < 67.5)
    vert = (angle >= 67.5) & (angle < 112.5)
    diag_ur = (angle >= 112.5) & (angle < 157.5)

    n1 = np.where(horiz, shifted(0, 1), 0.0)
    n2 = np.where(horiz, shifted(0, -1), 0.0)
    n1 = np.where(diag_dr, shifted(1, 1), n1)
    n2 = np.where(diag_dr, shifted(-1, -1), n2)
    n1 = np.where(vert, shifted(1, 0), n1)
    n2 = np.where(vert, shifted(-1, 0), n2)
    n1 = np.where(diag_ur, shifted(1, -1), n1)
    n2 = np.where(diag_ur, shifted(-1, 1), n2)

    ridge = mag * ((mag >= n1) & (mag >= n2))
    ridge[0, :] = ridge[-1, :] = 0.0
    ridge[:, 0] = ridge[:, -1] = 0.0

    t_high = high * mag.max()
    t_low = low * mag.max()
    strong = ridge >= t_high
    weak = ridge >= t_low
    # Keep weak components that touch at least one strong pixel (8-connectivity).
    labels, n_labels = ndimage.label(weak, structure=np.ones((3, 3)))
    if n_labels == 0:
        return np.zeros_like(gray)
    keep = np.zeros(n_labels + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels].astype(np.float64)


def extract_edges(
    gray: torch.Tensor,
    sigma: float = DEFAULT_SIGMA,
    low: float = DEFAULT_LOW,
    high: float = DEFAULT_HIGH,
) -> torch.Tensor:
    """Edge map (1,H,W) in {0,1} for a grayscale tensor (1,H,W) in [0,1]."""
    if gray.dim() != 3 or gray.shape[0] != 1:
        raise InputError(f"expected gray tensor of shape (1,H,W), got {tuple(gray.shape)}")
    edge = canny(gray[0].detach().cpu().numpy(), sigma, low, high)
    return torch.from_numpy(edge).to(dtype=gray.dtype).unsqueeze(0)
