"""CT-style preprocessing: foreground crop, bilinear resize, CLAHE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image_core import GrayImage


@dataclass(frozen=True)
class ClaheConfig:
    tile_cols: int = 8
    tile_rows: int = 8
    clip_limit: float = 2.0  # multiplier of the uniform bin height
    bins: int = 256

    def __post_init__(self):
        if self.tile_cols < 1 or self.tile_rows < 1:
            raise ValueError("tile grid must be at least 1x1")
        if self.clip_limit < 1.0:
            raise ValueError("clip_limit must be >= 1.0")
        if self.bins != 256:
            raise ValueError("bins is fixed at 256 for 8-bit images")


@dataclass(frozen=True)
class PreprocessConfig:
    crop_threshold: int = 10
    target_width: int = 224
    target_height: int = 224
    clahe: ClaheConfig = field(default_factory=ClaheConfig)
    enable_crop: bool = True
    enable_clahe: bool = True

    def __post_init__(self):
        if not 0 <= self.crop_threshold <= 255:
            raise ValueError("crop_threshold must lie in [0, 255]")
        if self.target_width < 3 or self.target_height < 3:
            raise ValueError("target size must be at least 3x3")


def crop_foreground(img: GrayImage, threshold: int) -> GrayImage:
    """Tight bounding box of pixels brighter than `threshold`; no-op if none."""
    mask = img.pixels > threshold
    if not mask.any():
        return img
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return GrayImage(img.pixels[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1])


def resize_bilinear(img: GrayImage, w: int, h: int) -> GrayImage:
    """Bilinear resize with half-pixel centers, edge clamping and round-half-up."""
    if w < 1 or h < 1:
        raise ValueError("target dimensions must be >= 1")
    src = img.pixels.astype(np.float64)
    H, W = src.shape
    if (w, h) == (W, H):
        return img

    def axis_coords(out_n, in_n):
        c = (np.arange(out_n) + 0.5) * in_n / out_n - 0.5
        lo = np.clip(np.floor(c).astype(np.int64), 0, in_n - 1)
        hi = np.minimum(lo + 1, in_n - 1)
        frac = np.clip(c - lo, 0.0, 1.0)
        return lo, hi, frac

    x0, x1, fx = axis_coords(w, W)
    y0, y1, fy = axis_coords(h, H)
    fy = fy[:, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = np.floor(top * (1 - fy) + bot * fy + 0.5)
    # rounding must not escape the input intensity range
    out = np.clip(out, src.min(), src.max())
    return GrayImage(out.astype(np.uint8))


def clip_redistribute(hist: np.ndarray, limit: float) -> np.ndarray:
    """Clip bins at `limit` and spread the excess uniformly; mass-conserving."""
    clipped = np.minimum(hist.astype(np.float64), limit)
    excess = hist.sum() - clipped.sum()
    return clipped + excess / hist.size


def _tile_mapping(tile: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clipped, mass-conserving 256-bin equalization mapping for one tile."""
    hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
    total = tile.size
    limit = clip_limit * total / 256.0
    cdf = np.cumsum(clip_redistribute(hist, limit))
    return np.floor(cdf / total * 255.0 + 0.5).astype(np.float64)


def clahe(img: GrayImage, cfg: ClaheConfig) -> GrayImage:
    """Contrast-limited adaptive histogram equalization.

    Per-tile clipped-histogram mappings, bilinearly interpolated between the
    four surrounding tile centers (clamped at image edges).
    """
    px = img.pixels
    H, W = px.shape
    ty = min(cfg.tile_rows, H)
    tx = min(cfg.tile_cols, W)

    ybounds = [H * i // ty for i in range(ty + 1)]
    xbounds = [W * i // tx for i in range(tx + 1)]
    maps = np.empty((ty, tx, 256))
    for r in range(ty):
        for c in range(tx):
            tile = px[ybounds[r] : ybounds[r + 1], xbounds[c] : xbounds[c + 1]]
            maps[r, c] = _tile_mapping(tile, cfg.clip_limit)

    def axis_interp(coords, bounds, n_tiles):
        centers = np.array([(bounds[i] + bounds[i + 1] - 1) / 2.0 for i in range(n_tiles)])
        lo = np.clip(np.searchsorted(centers, coords, side="right") - 1, 0, n_tiles - 1)
        hi = np.minimum(lo + 1, n_tiles - 1)
        span = centers[hi] - centers[lo]
        frac = np.where(span > 0, (coords - centers[lo]) / np.where(span > 0, span, 1.0), 0.0)
        return lo, hi, np.clip(frac, 0.0, 1.0)

    r0, r1, wy = axis_interp(np.arange(H, dtype=np.float64), ybounds, ty)
    c0, c1, wx = axis_interp(np.arange(W, dtype=np.float64), xbounds, tx)
    wy = wy[:, None]
    wx = wx[None, :]
    px_idx = px.astype(np.int64)

    def lookup(ri, ci):
        return maps[ri[:, None], ci[None, :], px_idx]

    out = (
        lookup(r0, c0) * (1 - wy) * (1 - wx)
        + lookup(r0, c1) * (1 - wy) * wx
        + lookup(r1, c0) * wy * (1 - wx)
        + lookup(r1, c1) * wy * wx
    )
    return GrayImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


def preprocess(img: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    """Crop (optional) -> resize -> CLAHE (optional), in that order."""
    if cfg.enable_crop:
        img = crop_foreground(img, cfg.crop_threshold)
    img = resize_bilinear(img, cfg.target_width, cfg.target_height)
    if cfg.enable_clahe:
        img = clahe(img, cfg.clahe)
    return img
