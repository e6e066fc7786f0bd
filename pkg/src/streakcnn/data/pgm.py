"""Binary PGM (P5) cutouts, 8 bits per pixel."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from ..errors import FormatError

CUTOUT_SIZE = 64

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def decode_pgm(data: bytes, size: int | None = CUTOUT_SIZE) -> np.ndarray:
    tokens = []
    pos = 0
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = tokens
    if magic != b"P5":
        raise FormatError(f"wrong magic {magic!r}; expected binary PGM (P5)")
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-numeric PGM header field") from None
    if size is not None and (width, height) != (size, size):
        raise FormatError(f"cutout is {width}x{height}, expected {size}x{size}")
    if maxval != 255:
        raise FormatError(f"maxval {maxval}; only 8-bit (255) cutouts are supported")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after PGM header")
    pixels = data[pos + 1:]
    if len(pixels) != width * height:
        raise FormatError(f"PGM raster has {len(pixels)} bytes, expected {width * height}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(pixels) -> bytes:
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise FormatError(f"PGM needs a 2-D raster, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255 or not np.all(arr == np.round(arr))):
            raise FormatError("PGM pixels must be integers in [0, 255]")
        arr = arr.astype(np.uint8)
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + arr.tobytes()


def read_cutout(path, size: int | None = CUTOUT_SIZE) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes(), size)


def write_cutout(pixels, path) -> None:
    Path(path).write_bytes(encode_pgm(pixels))
