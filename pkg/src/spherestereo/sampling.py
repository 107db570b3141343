"""Image resampling helpers."""

from __future__ import annotations

import numpy as np

LUMA = (0.299, 0.587, 0.114)


def to_gray(image) -> np.ndarray:
    """Return a float32 grayscale copy; RGB(A) inputs are converted to luma."""
    image = np.asarray(image)
    if image.ndim == 3:
        rgb = image[..., :3].astype(np.float64)
        gray = rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]
        return gray.astype(np.float32)
    return image.astype(np.float32)


def bilinear(image: np.ndarray, x, y, fill: float = 0.0):
    """Sample ``image`` at continuous pixel positions.

    Positions outside ``[0, w-1] x [0, h-1]`` or non-finite are masked.
    Returns ``(values, mask)`` shaped like ``x``. Works for (h, w) and
    (h, w, c) images.
    """
    h, w = image.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mask = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.where(mask, x, 0.0)
    ys = np.where(mask, y, 0.0)
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    img = image.astype(np.float64, copy=False)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    m = mask[..., None] if img.ndim == 3 else mask
    out = np.where(m, out, fill)
    return out, mask


def nearest(image: np.ndarray, x, y, fill=0):
    h, w = image.shape[:2]
    xi = np.rint(np.asarray(x, dtype=np.float64))
    yi = np.rint(np.asarray(y, dtype=np.float64))
    mask = np.isfinite(xi) & np.isfinite(yi) & (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1)
    xi = np.where(mask, xi, 0).astype(np.intp)
    yi = np.where(mask, yi, 0).astype(np.intp)
    out = image[yi, xi]
    m = mask[..., None] if out.ndim > mask.ndim else mask
    return np.where(m, out, fill), mask
