"""Image representation, rectangular ROIs, binary masks, and raster file I/O.

Brightness is carried as float64 and is *not* clamped internally: color
calibration may legitimately push samples above 255, and clamping early would
corrupt downstream region statistics. Clamping and half-up rounding happen
exactly once, at export.

Layout: three separate channel planes (R, G, B), each row-major with the
origin at the top-left pixel. Images and masks are immutable after
construction and safe to share between threads.

File formats:

* binary PPM (P6, maxval 255) - canonical interchange format, bit-exact.
* PNG (8-bit RGB) - accepted on input only, decoded with Pillow.
* binary PBM (P4) - mask export.
* run-length JSON ``{"width", "height", "runs": [[start, length], ...]}``
  over row-major pixel order - mask wire format for the HTTP API.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptImageError,
    DimensionMismatchError,
    EmptyRegionError,
    ImageFileMissingError,
    RoiBoundsError,
    UnsupportedImageFormatError,
)

__all__ = [
    "RgbImage",
    "Roi",
    "BinaryMask",
    "load_image",
    "save_image",
    "decode_image",
    "encode_ppm",
    "decode_ppm",
    "channel_means",
    "save_mask_pbm",
    "load_mask_pbm",
    "encode_pbm",
    "decode_pbm",
    "mask_to_rle",
    "rle_to_mask",
    "crop",
    "resize_bilinear",
    "upsample_nearest",
]


@dataclass(frozen=True)
class RgbImage:
    """Real-valued RGB raster stored as three (height, width) planes."""

    planes: np.ndarray  # shape (3, height, width), float64, read-only

    def __post_init__(self):
        planes = np.ascontiguousarray(self.planes, dtype=np.float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ValueError(f"expected (3, h, w) planes, got {planes.shape}")
        if planes.shape[1] < 1 or planes.shape[2] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(planes)):
            raise ValueError("image contains non-finite brightness values")
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @classmethod
    def from_interleaved(cls, pixels: np.ndarray) -> "RgbImage":
        """Build from an (h, w, 3) array."""
        pixels = np.asarray(pixels, dtype=np.float64)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixels, got {pixels.shape}")
        return cls(np.moveaxis(pixels, 2, 0))

    @classmethod
    def full(cls, width: int, height: int, color: tuple[float, float, float]) -> "RgbImage":
        planes = np.empty((3, height, width), dtype=np.float64)
        for c in range(3):
            planes[c].fill(color[c])
        return cls(planes)

    def interleaved(self) -> np.ndarray:
        """Copy as (h, w, 3)."""
        return np.moveaxis(self.planes, 0, 2).copy()


@dataclass(frozen=True)
class Roi:
    """Axis-aligned rectangle: offsets from the top-left corner plus size."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValueError(f"Roi.{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def check_within(self, width: int, height: int) -> None:
        if self.w < 1 or self.h < 1:
            raise RoiBoundsError(f"ROI {self} has an empty side")
        if self.x < 0 or self.y < 0 or self.x + self.w > width or self.y + self.h > height:
            raise RoiBoundsError(f"ROI {self} does not fit a {width}x{height} image")

    @classmethod
    def parse(cls, text: str) -> "Roi":
        """Parse the CLI/API string form ``"x,y,w,h"``."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 'x,y,w,h', got {text!r}")
        try:
            x, y, w, h = (int(p.strip()) for p in parts)
        except ValueError as exc:
            raise ValueError(f"non-integer ROI component in {text!r}") from exc
        return cls(x, y, w, h)

    def __str__(self) -> str:
        return f"{self.x},{self.y},{self.w},{self.h}"


@dataclass(frozen=True)
class BinaryMask:
    """One boolean per pixel, with the true-pixel count cached."""

    bits: np.ndarray  # shape (height, width), bool, read-only
    popcount: int = field(default=-1)

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError(f"expected (h, w) bits, got {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "popcount", int(np.count_nonzero(bits)))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def check_matches(self, other: "BinaryMask | RgbImage") -> None:
        if (self.height, self.width) != (other.height, other.width):
            raise DimensionMismatchError(
                f"mask is {self.width}x{self.height}, "
                f"other raster is {other.width}x{other.height}"
            )


# ---------------------------------------------------------------------------
# PPM (P6) codec
# ---------------------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_ppm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise CorruptImageError("truncated PPM header")
    return buf[start:pos], pos


def decode_ppm(data: bytes) -> RgbImage:
    """Decode a binary PPM (P6, maxval 255)."""
    if not data.startswith(b"P6"):
        raise CorruptImageError("not a P6 PPM stream")
    pos = 2
    try:
        w_tok, pos = _read_ppm_token(data, pos)
        h_tok, pos = _read_ppm_token(data, pos)
        max_tok, pos = _read_ppm_token(data, pos)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except (ValueError, CorruptImageError) as exc:
        raise CorruptImageError(f"bad PPM header: {exc}") from exc
    if width < 1 or height < 1:
        raise CorruptImageError(f"bad PPM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedImageFormatError(f"only maxval 255 PPM is supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise CorruptImageError(
            f"PPM raster holds {len(raster)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return RgbImage.from_interleaved(pixels.astype(np.float64))


def encode_ppm(image: RgbImage) -> bytes:
    """Encode as binary PPM, clamping to [0, 255] and rounding half-up."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    clamped = np.clip(image.planes, 0.0, 255.0)
    quantised = np.floor(clamped + 0.5).astype(np.uint8)  # half-up, values already in range
    return header + np.moveaxis(quantised, 0, 2).tobytes()


def decode_image(data: bytes) -> RgbImage:
    """Decode PPM or PNG bytes, distinguishing unsupported from corrupt."""
    if len(data) == 0:
        raise CorruptImageError("empty file")
    if data.startswith(b"P6"):
        return decode_ppm(data)
    if data.startswith(_PNG_MAGIC):
        from PIL import Image, UnidentifiedImageError

        try:
            with Image.open(io.BytesIO(data)) as img:
                rgb = img.convert("RGB")
                pixels = np.asarray(rgb, dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as exc:
            raise CorruptImageError(f"broken PNG: {exc}") from exc
        return RgbImage.from_interleaved(pixels.astype(np.float64))
    raise UnsupportedImageFormatError(
        "unrecognised raster format (expected binary PPM or PNG)"
    )


def load_image(path) -> RgbImage:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise ImageFileMissingError(f"no such image file: {path}") from exc
    return decode_image(data)


def save_image(image: RgbImage, path) -> None:
    """Write as binary PPM. Export is the only place values are quantised."""
    with open(path, "wb") as fh:
        fh.write(encode_ppm(image))


# ---------------------------------------------------------------------------
# Region statistics
# ---------------------------------------------------------------------------


def channel_means(image: RgbImage, region: "Roi | BinaryMask") -> tuple[float, float, float]:
    """Arithmetic mean brightness per channel over exactly the region's pixels.

    Sums are accumulated in extended precision so the result matches a
    compensated-summation oracle to within 1 ULP.
    """
    if isinstance(region, Roi):
        region.check_within(image.width, image.height)
        view = image.planes[:, region.y : region.y + region.h, region.x : region.x + region.w]
        count = region.w * region.h
        sums = view.sum(axis=(1, 2), dtype=np.longdouble)
    elif isinstance(region, BinaryMask):
        region.check_matches(image)
        count = region.popcount
        if count == 0:
            raise EmptyRegionError("mask selects no pixels")
        sums = image.planes[:, region.bits].sum(axis=1, dtype=np.longdouble)
    else:
        raise TypeError(f"region must be Roi or BinaryMask, got {type(region)!r}")
    return tuple(float(s / count) for s in sums)


# ---------------------------------------------------------------------------
# PBM (P4) mask codec and run-length wire format
# ---------------------------------------------------------------------------


def encode_pbm(mask: BinaryMask) -> bytes:
    header = f"P4\n{mask.width} {mask.height}\n".encode("ascii")
    packed = np.packbits(mask.bits, axis=1)  # pads each row to a byte boundary
    return header + packed.tobytes()


def decode_pbm(data: bytes) -> BinaryMask:
    if not data.startswith(b"P4"):
        raise CorruptImageError("not a P4 PBM stream")
    pos = 2
    try:
        w_tok, pos = _read_ppm_token(data, pos)
        h_tok, pos = _read_ppm_token(data, pos)
        width, height = int(w_tok), int(h_tok)
    except (ValueError, CorruptImageError) as exc:
        raise CorruptImageError(f"bad PBM header: {exc}") from exc
    pos += 1
    row_bytes = (width + 7) // 8
    expected = row_bytes * height
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise CorruptImageError(f"PBM raster holds {len(raster)} bytes, expected {expected}")
    rows = np.frombuffer(raster, dtype=np.uint8).reshape(height, row_bytes)
    bits = np.unpackbits(rows, axis=1)[:, :width].astype(bool)
    return BinaryMask(bits)


def save_mask_pbm(mask: BinaryMask, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pbm(mask))


def load_mask_pbm(path) -> BinaryMask:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise ImageFileMissingError(f"no such mask file: {path}") from exc
    return decode_pbm(data)


def mask_to_rle(mask: BinaryMask) -> dict:
    """Run-length encode true pixels over row-major order."""
    flat = mask.bits.ravel().astype(np.int8)
    edges = np.diff(np.concatenate((np.zeros(1, np.int8), flat, np.zeros(1, np.int8))))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    runs = [[int(s), int(e - s)] for s, e in zip(starts, ends)]
    return {"width": mask.width, "height": mask.height, "runs": runs}


def rle_to_mask(rle: dict) -> BinaryMask:
    width, height = int(rle["width"]), int(rle["height"])
    flat = np.zeros(width * height, dtype=bool)
    for start, length in rle["runs"]:
        start, length = int(start), int(length)
        if start < 0 or length < 1 or start + length > flat.size:
            raise ValueError(f"run [{start}, {length}] exceeds {width}x{height} raster")
        flat[start : start + length] = True
    return BinaryMask(flat.reshape(height, width))


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------


def crop(image: RgbImage, roi: Roi) -> RgbImage:
    roi.check_within(image.width, image.height)
    return RgbImage(image.planes[:, roi.y : roi.y + roi.h, roi.x : roi.x + roi.w].copy())


def resize_bilinear(image: RgbImage, width: int, height: int) -> RgbImage:
    """Bilinear resample using the half-pixel-centre convention."""
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    src = image.planes
    sh, sw = src.shape[1], src.shape[2]
    ys = np.clip((np.arange(height) + 0.5) * (sh / height) - 0.5, 0.0, sh - 1.0)
    xs = np.clip((np.arange(width) + 0.5) * (sw / width) - 0.5, 0.0, sw - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, sh - 1)
    x1 = np.minimum(x0 + 1, sw - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    out = np.empty((3, height, width), dtype=np.float64)
    for c in range(3):
        plane = src[c]
        top = plane[y0][:, x0] * (1 - wx) + plane[y0][:, x1] * wx
        bot = plane[y1][:, x0] * (1 - wx) + plane[y1][:, x1] * wx
        out[c] = top * (1 - wy) + bot * wy
    return RgbImage(out)


def upsample_nearest(planes: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbour resample of (c, h, w) planes to (c, height, width)."""
    sh, sw = planes.shape[1], planes.shape[2]
    ys = np.minimum(((np.arange(height) + 0.5) * (sh / height)).astype(np.intp), sh - 1)
    xs = np.minimum(((np.arange(width) + 0.5) * (sw / width)).astype(np.intp), sw - 1)
    return planes[:, ys][:, :, xs]
