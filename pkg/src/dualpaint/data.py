"""Samples, masks, and the synthetic desk-scale dataset.

Conventions: all images are float tensors in [0,1]; masks are (1,H,W) with
1 = known pixel, 0 = hole. On disk masks are 8-bit grayscale PNGs with
255 = known, thresholded at 128 on load.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .edges import DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_SIGMA, extract_edges
from .errors import InputError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MASK_THRESHOLD = 128

BUCKET_WIDTH = 10


@dataclass(frozen=True)
class MaskBucket:
    """Half-open hole-ratio interval [lower, upper), width 10 percent."""

    lower: int
    upper: int

    def __post_init__(self):
        if self.upper - self.lower != BUCKET_WIDTH or not (0 <= self.lower < self.upper <= 100):
            raise InputError(f"invalid bucket [{self.lower},{self.upper})")

    def contains(self, hole_percent: float) -> bool:
        return self.lower <= hole_percent < self.upper


@dataclass(frozen=True)
class Sample:
    """Ground truth plus mask and all derived corrupted variants."""

    image_gt: torch.Tensor  # (3,H,W) in [0,1]
    edge_gt: torch.Tensor   # (1,H,W) in {0,1}
    gray_gt: torch.Tensor   # (1,H,W) in [0,1]
    mask: torch.Tensor      # (1,H,W) in {0,1}, 1 = known
    image_in: torch.Tensor
    edge_in: torch.Tensor
    gray_in: torch.Tensor

    @staticmethod
    def create(
        image_gt: torch.Tensor,
        mask: torch.Tensor,
        edge_sigma: float = DEFAULT_SIGMA,
        edge_low: float = DEFAULT_LOW,
        edge_high: float = DEFAULT_HIGH,
    ) -> "Sample":
        if image_gt.dim() != 3 or image_gt.shape[0] != 3:
            raise InputError(f"image_gt must be (3,H,W), got {tuple(image_gt.shape)}")
        if mask.dim() != 3 or mask.shape[0] != 1:
            raise InputError(f"mask must be (1,H,W), got {tuple(mask.shape)}")
        if mask.shape[-2:] != image_gt.shape[-2:]:
            raise InputError(
                f"mask size {tuple(mask.shape[-2:])} != image size {tuple(image_gt.shape[-2:])}"
            )
        if not torch.all((mask == 0) | (mask == 1)):
            raise InputError("mask must contain only 0 and 1")
        image_gt = image_gt.float()
        mask = mask.float()
        gray_gt = to_grayscale(image_gt)
        edge_gt = extract_edges(gray_gt, edge_sigma, edge_low, edge_high)
        return Sample(
            image_gt=image_gt,
            edge_gt=edge_gt,
            gray_gt=gray_gt,
            mask=mask,
            image_in=image_gt * mask,
            edge_in=edge_gt * mask,
            gray_in=gray_gt * mask,
        )

    @property
    def hole_percent(self) -> float:
        return float((1.0 - self.mask).mean()) * 100.0

    @property
    def size(self) -> tuple[int, int]:
        return tuple(self.image_gt.shape[-2:])


def to_grayscale(image: torch.Tensor) -> torch.Tensor:
    """BT.601 luma of an RGB tensor; accepts (3,H,W) or (B,3,H,W)."""
    if image.shape[-3] != 3:
        raise InputError(f"expected 3 channels at dim -3, got shape {tuple(image.shape)}")
    r, g, b = LUMA_WEIGHTS
    channels = image.unbind(dim=-3)
    gray = r * channels[0] + g * channels[1] + b * channels[2]
    return gray.unsqueeze(-3)


def classify_mask_ratio(mask: torch.Tensor) -> MaskBucket:
    """Bucket the hole fraction into half-open 10-percent intervals.

    A degenerate all-hole mask (100%) falls into the top bucket [90,100).
    """
    hole_percent = float((1.0 - mask).mean()) * 100.0
    lower = min(int(hole_percent // BUCKET_WIDTH) * BUCKET_WIDTH, 100 - BUCKET_WIDTH)
    return MaskBucket(lower, lower + BUCKET_WIDTH)


# ---------------------------------------------------------------------------
# File I/O


def load_image(path) -> torch.Tensor:
    """Read PNG/JPEG into a (3,H,W) float tensor in [0,1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except OSError as e:
        raise InputError(f"cannot read image {path}: {e}") from e
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image(image: torch.Tensor, path) -> None:
    """Write a (3,H,W) or (1,H,W) tensor in [0,1] as an 8-bit PNG."""
    arr = image.detach().cpu().clamp(0, 1).numpy()
    arr = np.rint(arr * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        Image.fromarray(arr[0], mode="L").save(path)
    else:
        Image.fromarray(arr.transpose(1, 2, 0), mode="RGB").save(path)


def load_mask(path) -> torch.Tensor:
    """Read an 8-bit grayscale mask PNG; >= 128 counts as known."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except OSError as e:
        raise InputError(f"cannot read mask {path}: {e}") from e
    return torch.from_numpy((arr >= MASK_THRESHOLD).astype(np.float32)).unsqueeze(0)


def save_mask(mask: torch.Tensor, path) -> None:
    arr = (mask.detach().cpu()[0].numpy() >= 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)


def read_manifest(path) -> list[Path]:
    """Newline-delimited file paths; blank lines ignored."""
    lines = Path(path).read_text().splitlines()
    return [Path(line.strip()) for line in lines if line.strip()]


def resize_image(image: torch.Tensor, size: int) -> torch.Tensor:
    return F.interpolate(image.unsqueeze(0), size=(size, size), mode="bilinear", align_corners=False)[0]


def resize_mask(mask: torch.Tensor, size: int) -> torch.Tensor:
    return F.interpolate(mask.unsqueeze(0), size=(size, size), mode="nearest")[0]


def make_sample(image_path, mask_source, target_size: int | None = None, **edge_kwargs) -> Sample:
    """Assemble a Sample from an image file and a mask file or tensor."""
    image = load_image(image_path)
    mask = load_mask(mask_source) if isinstance(mask_source, (str, Path)) else mask_source.float()
    if target_size is not None:
        image = resize_image(image, target_size).clamp(0, 1)
        mask = resize_mask(mask, target_size)
    if mask.shape[-2:] != image.shape[-2:]:
        raise InputError(
            f"mask size {tuple(mask.shape[-2:])} != image size {tuple(image.shape[-2:])} after resize"
        )
    return Sample.create(image, mask, **edge_kwargs)


# ---------------------------------------------------------------------------
# Synthetic desk-scale dataset


def _stripes(rng: np.random.Generator, size: int, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    theta = rng.uniform(0, math.pi)
    period = rng.uniform(size / 8, size / 3)
    phase = rng.uniform(0, 2 * math.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    wave = np.sin(2 * math.pi * (xx * math.cos(theta) + yy * math.sin(theta)) / period + phase)
    sel = (wave > 0)[None, :, :]
    return np.where(sel, c1[:, None, None], c2[:, None, None])


def _checker(rng: np.random.Generator, size: int, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    cell = int(rng.integers(max(2, size // 8), max(3, size // 4) + 1))
    off_y, off_x = rng.integers(0, cell, size=2)
    yy, xx = np.mgrid[0:size, 0:size]
    sel = ((((yy + off_y) // cell) + ((xx + off_x) // cell)) % 2 == 0)[None, :, :]
    return np.where(sel, c1[:, None, None], c2[:, None, None])


def _gradient(rng: np.random.Generator, size: int, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    theta = rng.uniform(0, 2 * math.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    t = (xx * math.cos(theta) + yy * math.sin(theta)).astype(np.float64)
    t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
    return c1[:, None, None] * (1 - t)[None] + c2[:, None, None] * t[None]


def _contrast_pair(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    while True:
        c1, c2 = rng.uniform(0, 1, size=3), rng.uniform(0, 1, size=3)
        if np.abs(c1 - c2).mean() >= 0.25:
            return c1, c2


def make_texture(rng: np.random.Generator, size: int) -> torch.Tensor:
    c1, c2 = _contrast_pair(rng)
    kind = int(rng.integers(0, 3))
    fn = (_stripes, _checker, _gradient)[kind]
    return torch.from_numpy(np.ascontiguousarray(fn(rng, size, c1, c2))).float()


def _stamp_disk(hole: np.ndarray, cy: float, cx: float, r: int) -> None:
    size = hole.shape[0]
    y0, y1 = max(0, int(cy - r)), min(size, int(cy + r + 1))
    x0, x1 = max(0, int(cx - r)), min(size, int(cx + r + 1))
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    hole[y0:y1, x0:x1] |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def make_mask(rng: np.random.Generator, size: int, bucket: MaskBucket) -> torch.Tensor:
    """Random rectangle plus brush strokes, landing inside the given bucket."""
    hole = np.zeros((size, size), dtype=bool)
    n_px = size * size
    target = rng.uniform(bucket.lower + 0.5, max(bucket.lower + 0.6, bucket.upper - 3.0))

    if target >= 8.0:
        h, w = rng.integers(size // 8, size // 4 + 1, size=2)
        if h * w / n_px * 100.0 <= target:
            y = int(rng.integers(0, size - h))
            x = int(rng.integers(0, size - w))
            hole[y : y + h, x : x + w] = True

    r = max(1, size // 14)
    cy, cx = rng.uniform(0, size, size=2)
    angle = rng.uniform(0, 2 * math.pi)
    while hole.mean() * 100.0 < target:
        _stamp_disk(hole, cy, cx, r)
        angle += rng.uniform(-0.8, 0.8)
        cy = float(np.clip(cy + 1.5 * r * math.sin(angle), 0, size - 1))
        cx = float(np.clip(cx + 1.5 * r * math.cos(angle), 0, size - 1))
        if rng.uniform() < 0.08:  # start a new stroke
            cy, cx = rng.uniform(0, size, size=2)
            angle = rng.uniform(0, 2 * math.pi)
    return torch.from_numpy((~hole).astype(np.float32)).unsqueeze(0)


SYNTH_BUCKETS = tuple(MaskBucket(lo, lo + 10) for lo in range(0, 60, 10))


def synth_dataset(n: int, size: int = 64, seed: int = 0) -> list[Sample]:
    """Procedural textures with random holes cycling through the six buckets."""
    if n <= 0:
        raise InputError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        image = make_texture(rng, size)
        mask = make_mask(rng, size, SYNTH_BUCKETS[i % len(SYNTH_BUCKETS)])
        samples.append(Sample.create(image, mask))
    return samples
