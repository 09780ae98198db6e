"""Grayscale image type, raster I/O and directory-per-class dataset scanning."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError, ImageFormatError

# BT.601 luma weights; applied with round-half-up so (v, v, v) -> v exactly.
_LUMA_R = 0.299
_LUMA_G = 0.587
_LUMA_B = 0.114

SUPPORTED_EXTENSIONS = {".pgm", ".png", ".jpg", ".jpeg"}


class GrayImage:
    """8-bit single-channel raster, row-major, immutable after construction."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.any((arr < 0) | (arr > 255)):
                raise ValueError("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class ImageManifest:
    """Sorted (path, label index) entries plus the class-name table."""

    entries: tuple[tuple[Path, int], ...]
    class_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.entries)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma with round-half-up, uint8 output."""
    rgb = rgb.astype(np.float64)
    luma = _LUMA_R * rgb[..., 0] + _LUMA_G * rgb[..., 1] + _LUMA_B * rgb[..., 2]
    return np.floor(luma + 0.5).astype(np.uint8)


def _read_pgm(data: bytes, path: Path) -> GrayImage:
    # P2 (ASCII) and P5 (binary), maxval 255 only.
    def tokens():
        pos = 0
        while pos < len(data):
            if data[pos : pos + 1] == b"#":  # comment to end of line
                eol = data.find(b"\n", pos)
                pos = len(data) if eol < 0 else eol + 1
                continue
            if data[pos : pos + 1].isspace():
                pos += 1
                continue
            end = pos
            while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
                end += 1
            yield pos, data[pos:end]
            pos = end

    it = tokens()
    try:
        _, magic = next(it)
        _, w_tok = next(it)
        _, h_tok = next(it)
        maxval_pos, maxval_tok = next(it)
        width, height, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except (StopIteration, ValueError) as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported PGM maxval {maxval} (only 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    n = width * height
    if magic == b"P5":
        start = maxval_pos + len(maxval_tok) + 1  # single whitespace after maxval
        raster = data[start : start + n]
        if len(raster) < n:
            raise ImageFormatError(f"{path}: truncated PGM raster")
        arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    elif magic == b"P2":
        try:
            vals = [int(tok) for _, tok in it]
        except ValueError as exc:
            raise ImageFormatError(f"{path}: non-numeric PGM sample") from exc
        if len(vals) < n:
            raise ImageFormatError(f"{path}: truncated PGM raster")
        arr = np.array(vals[:n], dtype=np.int64).reshape(height, width)
        if arr.min() < 0 or arr.max() > 255:
            raise ImageFormatError(f"{path}: PGM sample out of range")
        arr = arr.astype(np.uint8)
    else:
        raise ImageFormatError(f"{path}: unknown PGM magic {magic!r}")
    return GrayImage(arr)


def _read_pil(data: bytes, path: Path) -> GrayImage:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a supported raster file ({exc})") from exc
    except OSError as exc:
        raise ImageFormatError(f"{path}: decode failed ({exc})") from exc
    if img.mode == "L":
        return GrayImage(np.asarray(img, dtype=np.uint8))
    if img.mode == "RGB":
        return GrayImage(rgb_to_gray(np.asarray(img)))
    raise ImageFormatError(f"{path}: unsupported pixel mode {img.mode!r} (need 8-bit gray or RGB)")


def load_image(path: str | Path) -> GrayImage:
    """Decode PGM (P2/P5), PNG (8-bit gray/RGB) or JPEG into a GrayImage."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: cannot read file ({exc})") from exc
    if data[:2] in (b"P2", b"P5"):
        return _read_pgm(data, path)
    if data[:8] == b"\x89PNG\r\n\x1a\n" or data[:2] == b"\xff\xd8":
        return _read_pil(data, path)
    raise ImageFormatError(f"{path}: unrecognized format (not PGM/PNG/JPEG)")


def save_image(img: GrayImage, path: str | Path) -> None:
    """Write PGM (P5) or PNG depending on the file extension. Round-trip exact."""
    path = Path(path)
    ext = path.suffix.lower()
    try:
        if ext == ".pgm":
            header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
            path.write_bytes(header + img.pixels.tobytes())
        elif ext == ".png":
            Image.fromarray(img.pixels, mode="L").save(path, format="PNG")
        else:
            raise DataError(f"{path}: unsupported output extension {ext!r} (use .pgm or .png)")
    except OSError as exc:
        raise DataError(f"{path}: cannot write file ({exc})") from exc


def scan_dataset(root: str | Path) -> ImageManifest:
    """Build a deterministic manifest from a <root>/<class>/<image> tree.

    Class indices follow lexicographic directory-name order; entries are
    sorted by path.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: dataset root is not a directory")
    class_dirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
    if len(class_dirs) < 2:
        raise DataError(f"{root}: need at least 2 class subdirectories, found {len(class_dirs)}")
    entries: list[tuple[Path, int]] = []
    for idx, class_dir in enumerate(class_dirs):
        files = sorted(
            p for p in class_dir.iterdir()
            if p.is_file() and p.suffix.lower() in SUPPORTED_EXTENSIONS
        )
        if not files:
            raise DataError(f"{class_dir}: class directory holds no supported images")
        entries.extend((p, idx) for p in files)
    entries.sort(key=lambda e: str(e[0]))
    return ImageManifest(tuple(entries), tuple(d.name for d in class_dirs))
