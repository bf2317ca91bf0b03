"""Image loading, grayscale conversion and resampling helpers.

Frames are plain numpy arrays: grayscale images are 2-D uint8 arrays of
shape (height, width); color images are (height, width, 3) RGB.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert an RGB frame to grayscale, luminance = round(0.299R + 0.587G + 0.114B)."""
    if img.ndim == 2:
        return img.astype(np.uint8)
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValueError(f"expected (h, w) or (h, w, 3) array, got shape {img.shape}")
    rgb = img[:, :, :3].astype(np.float64)
    lum = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.round(lum).clip(0, 255).astype(np.uint8)


def load_gray(path: str | Path) -> np.ndarray:
    """Load any Pillow-supported image (PGM/PPM/PNG/JPEG...) as grayscale."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"))
            return arr.astype(np.uint8)
        arr = np.asarray(im.convert("RGB"))
    return to_grayscale(arr)


def save_gray(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path)


def encode_jpeg(img: np.ndarray, quality: int = 85) -> bytes:
    """Encode a grayscale or RGB frame to JPEG bytes (for MJPEG parts)."""
    arr = np.asarray(img, dtype=np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def resize_nearest(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resample to (width, height). Deterministic index mapping."""
    if width < 1 or height < 1:
        raise ValueError("target size must be >= 1x1")
    src_h, src_w = img.shape[:2]
    rows = np.minimum((np.arange(height) * src_h) // height, src_h - 1)
    cols = np.minimum((np.arange(width) * src_w) // width, src_w - 1)
    return img[np.ix_(rows, cols)] if img.ndim == 2 else img[np.ix_(rows, cols)]


def validate_gray(img: np.ndarray) -> np.ndarray:
    """Check a grayscale image: 2-D, nonempty, intensities in 0..255."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"grayscale image must be 2-D and nonempty, got shape {arr.shape}")
    if arr.dtype.kind not in "ui":
        raise ValueError(f"grayscale image must be integer-valued, got dtype {arr.dtype}")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("pixel intensities must lie in 0..255")
    return arr
