"""HTTP inference endpoint backing the interactive mask editor.

POST /v1/inpaint takes a multipart form with an image PNG and an 8-bit gray
mask PNG (255 = known) and returns a JSON body with the base64-encoded
composite PNG, an optional edge PNG, the hole ratio, the model version, and
latency. Weights are loaded once at startup and treated as read-only;
requests are stateless and deterministic for identical request bytes.
"""

from __future__ import annotations

import base64
import hashlib
import io
import time

import numpy as np
import torch
import torch.nn.functional as F
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image, UnidentifiedImageError

from . import __version__
from .data import MASK_THRESHOLD, resize_image, resize_mask
from .generator import composite, inpaint
from .trainer import load_generator

DEFAULT_MAX_PIXELS = 4_000_000


def _decode_rgb(data: bytes) -> torch.Tensor:
    try:
        with Image.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as e:
        raise HTTPException(status_code=400, detail=f"malformed image: {e}") from e
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def _decode_mask(data: bytes) -> torch.Tensor:
    try:
        with Image.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("L"))
    except (UnidentifiedImageError, OSError) as e:
        raise HTTPException(status_code=400, detail=f"malformed mask: {e}") from e
    return torch.from_numpy((arr >= MASK_THRESHOLD).astype(np.float32)).unsqueeze(0)


def _encode_png(tensor: torch.Tensor) -> bytes:
    arr = np.rint(tensor.detach().clamp(0, 1).numpy() * 255.0).astype(np.uint8)
    img = Image.fromarray(arr[0], "L") if arr.shape[0] == 1 else Image.fromarray(arr.transpose(1, 2, 0), "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(
    checkpoint_path=None,
    max_pixels: int = DEFAULT_MAX_PIXELS,
    allow_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    app = FastAPI(title="dualpaint inference")
    app.add_middleware(
        CORSMiddleware, allow_origins=list(allow_origins), allow_methods=["*"], allow_headers=["*"]
    )
    app.state.model = None
    app.state.checkpoint_hash = ""
    app.state.started = time.monotonic()
    app.state.max_pixels = max_pixels

    if checkpoint_path is not None:
        app.state.model = load_generator(checkpoint_path)
        with open(checkpoint_path, "rb") as f:
            app.state.checkpoint_hash = hashlib.sha256(f.read()).hexdigest()

    @app.get("/v1/health")
    def health():
        if app.state.model is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "status": "ok",
            "model_version": f"dualpaint-{__version__}",
            "checkpoint_hash": app.state.checkpoint_hash,
            "uptime_s": time.monotonic() - app.state.started,
        }

    @app.post("/v1/inpaint")
    def inpaint_endpoint(
        image: UploadFile = File(...),
        mask: UploadFile = File(...),
        return_edges: bool = Form(False),
        target_size: int | None = Form(None),
    ):
        if app.state.model is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        started = time.perf_counter()
        image_t = _decode_rgb(image.file.read())
        mask_t = _decode_mask(mask.file.read())
        h, w = image_t.shape[-2:]
        if mask_t.shape[-2:] != (h, w):
            raise HTTPException(
                status_code=400,
                detail=f"mask dims {tuple(mask_t.shape[-2:])} != image dims {(h, w)}",
            )
        if h * w > app.state.max_pixels:
            raise HTTPException(status_code=413, detail=f"image exceeds {app.state.max_pixels} pixels")

        hole_percent = float((1.0 - mask_t).mean()) * 100.0
        if target_size is not None and (h, w) != (target_size, target_size):
            small_image = resize_image(image_t, target_size).clamp(0, 1)
            small_mask = resize_mask(mask_t, target_size)
            _, raw_out, edge_out = inpaint(app.state.model, small_image, small_mask)
            # back to native resolution, then composite against the original
            # image and mask so known pixels still pass through exactly
            raw_out = F.interpolate(raw_out.unsqueeze(0), size=(h, w), mode="bilinear", align_corners=False)[0]
            edge_out = F.interpolate(edge_out.unsqueeze(0), size=(h, w), mode="nearest")[0]
            comp = composite(raw_out.clamp(0, 1), image_t, mask_t)
        else:
            comp, _, edge_out = inpaint(app.state.model, image_t, mask_t)

        body = {
            "composite_png": base64.b64encode(_encode_png(comp)).decode("ascii"),
            "edge_png": base64.b64encode(_encode_png(edge_out)).decode("ascii") if return_edges else None,
            "mask_ratio_percent": hole_percent,
            "model_version": f"dualpaint-{__version__}",
            "latency_ms": (time.perf_counter() - started) * 1000.0,
        }
        return body

    return app
