"""Shared test utilities: finite-difference gradient checking."""

from __future__ import annotations

import numpy as np
import torch

FD_STEP = 1e-5
# Gradients whose magnitude falls below this floor are compared absolutely;
# it keeps relative error meaningful for coordinates with near-zero gradients.
REL_FLOOR = 1e-6


def finite_difference_errors(
    fn, tensors: dict[str, torch.Tensor], h: float = FD_STEP, max_coords_per_tensor: int | None = None, seed: int = 0
) -> np.ndarray:
    """Relative errors between autograd and central finite differences.

    ``fn()`` must return a scalar tensor computed from ``tensors`` (double
    precision, requires_grad). Coordinates are probed exhaustively unless
    ``max_coords_per_tensor`` caps them (seeded subset).
    """
    for t in tensors.values():
        assert t.dtype == torch.float64, "gradient checks run in double precision"
        assert t.data.is_contiguous(), "probed tensors must be contiguous"
        t.requires_grad_(True)
        t.grad = None
    out = fn()
    out.backward()

    rng = np.random.default_rng(seed)
    errors = []
    for t in tensors.values():
        grad = (t.grad if t.grad is not None else torch.zeros_like(t)).detach().reshape(-1).clone()
        flat = t.data.view(-1)
        coords = np.arange(flat.numel())
        if max_coords_per_tensor is not None and flat.numel() > max_coords_per_tensor:
            coords = rng.choice(flat.numel(), size=max_coords_per_tensor, replace=False)
        for i in coords:
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + h
                f_plus = float(fn())
                flat[i] = original - h
                f_minus = float(fn())
                flat[i] = original
            g_fd = (f_plus - f_minus) / (2.0 * h)
            g_ad = float(grad[i])
            denom = max(abs(g_fd), abs(g_ad), REL_FLOOR)
            errors.append(abs(g_fd - g_ad) / denom)
    return np.asarray(errors)


def assert_gradients_match(fn, tensors, rel_tol=1e-4, h=FD_STEP, max_coords_per_tensor=None):
    errs = finite_difference_errors(fn, tensors, h=h, max_coords_per_tensor=max_coords_per_tensor)
    assert errs.max() < rel_tol, f"worst relative gradient error {errs.max():.3e} >= {rel_tol}"
    return errs
