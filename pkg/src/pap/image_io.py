"""PNG/JPEG image IO and raster resizing helpers.

Panoramas are read from PNG or JPEG; masks are single-channel PNGs with
values 0 and 255. All rasters are numpy uint8 arrays, HxW (gray/mask)
or HxWx3 (color).
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def load_image(path: str | Path) -> np.ndarray:
    """Load a PNG/JPEG as uint8 HxW or HxWx3."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8)


def save_png(path: str | Path, pixels: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(pixels)).save(path, format="PNG")


def load_mask(path: str | Path) -> np.ndarray:
    """Load a single-channel mask PNG as a bool array (nonzero -> True)."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im) >= 128


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    save_png(path, mask.astype(np.uint8) * 255)


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im, dtype=np.uint8)


def resize(pixels: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    """Resize a raster; box (area) filter when shrinking by >= 2x per axis,
    bilinear otherwise. Thin structures survive heavy downsampling better
    under area averaging."""
    h, w = pixels.shape[:2]
    if (w, h) == (out_width, out_height):
        return pixels.copy()
    fx = w / out_width
    fy = h / out_height
    method = Image.Resampling.BOX if min(fx, fy) >= 2.0 else Image.Resampling.BILINEAR
    im = Image.fromarray(np.ascontiguousarray(pixels))
    return np.asarray(im.resize((out_width, out_height), method), dtype=np.uint8)
