"""LBP and adaptive-band LBP neighborhood encoders plus histogram featurization.

Both encoders use the same bit layout: the 8 neighbors are read clockwise
starting at the upper-left, upper-left being the least significant bit:

    bit  0   1   2   3   4   5   6   7
         UL  U   UR  R   DR  D   DL  L
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_core import GrayImage

# (dy, dx) per bit, clockwise from upper-left
NEIGHBOR_OFFSETS = (
    (-1, -1),  # UL
    (-1, 0),   # U
    (-1, 1),   # UR
    (0, 1),    # R
    (1, 1),    # DR
    (1, 0),    # D
    (1, -1),   # DL
    (0, -1),   # L
)


@dataclass(frozen=True)
class AlbpConfig:
    """beta is the relative half-width of the accept band around the center."""

    beta: float = 0.10

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


class CodeImage:
    """Raster of 8-bit descriptor codes covering the interior of the source."""

    __slots__ = ("codes",)

    def __init__(self, codes: np.ndarray):
        arr = np.ascontiguousarray(codes, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D code array, got shape {arr.shape}")
        arr.setflags(write=False)
        self.codes = arr

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    @property
    def height(self) -> int:
        return self.codes.shape[0]


def _check_size(img: GrayImage) -> None:
    if img.width < 3 or img.height < 3:
        raise ValueError(f"need at least a 3x3 image, got {img.width}x{img.height}")


def _neighbor_views(px: np.ndarray):
    H, W = px.shape
    for dy, dx in NEIGHBOR_OFFSETS:
        yield px[1 + dy : H - 1 + dy, 1 + dx : W - 1 + dx]


def lbp_encode(img: GrayImage) -> CodeImage:
    """Classical LBP: neighbor bit set iff neighbor >= center."""
    _check_size(img)
    px = img.pixels
    center = px[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, nb in enumerate(_neighbor_views(px)):
        codes |= (nb >= center).astype(np.uint8) << bit
    return CodeImage(codes)


def albp_encode(img: GrayImage, cfg: AlbpConfig) -> CodeImage:
    """Adaptive-band LBP: bit set iff the neighbor lies in
    [center*(1-beta), center*(1+beta)]. Bounds stay in real arithmetic."""
    _check_size(img)
    px = img.pixels
    center = px[1:-1, 1:-1].astype(np.float64)
    lbv = center * (1.0 - cfg.beta)
    ubv = center * (1.0 + cfg.beta)
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, nb in enumerate(_neighbor_views(px)):
        nb = nb.astype(np.float64)
        codes |= ((lbv <= nb) & (nb <= ubv)).astype(np.uint8) << bit
    return CodeImage(codes)


def histogram_features(codes: CodeImage) -> np.ndarray:
    """L1-normalized 256-bin histogram of code values."""
    if codes.codes.size == 0:
        raise ValueError("cannot featurize an empty code image")
    hist = np.bincount(codes.codes.ravel(), minlength=256).astype(np.float64)
    return hist / codes.codes.size


def extract(img: GrayImage, method: str, cfg: AlbpConfig | None = None) -> np.ndarray:
    """Encode with the chosen descriptor and featurize. method: 'lbp' | 'albp'."""
    if method == "lbp":
        return histogram_features(lbp_encode(img))
    if method == "albp":
        return histogram_features(albp_encode(img, cfg or AlbpConfig()))
    raise ValueError(f"unknown descriptor {method!r} (expected 'lbp' or 'albp')")
