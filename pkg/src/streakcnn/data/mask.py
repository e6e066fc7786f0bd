"""Instrument mask: rectangular frame regions sources may not be taken from.

Text format, one region per line, inclusive pixel bounds (0-indexed)::

    # central cross and borders
    rect 496 0 527 1023
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import FormatError
from .catalog import SourceRecord

CUTOUT_SIZE = 64


@dataclass(frozen=True)
class Rect:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise FormatError(f"empty rectangle {self}")


@dataclass
class MaskSpec:
    rects: list[Rect] = field(default_factory=list)

    def check_bounds(self, width: int, height: int) -> None:
        for r in self.rects:
            if r.x0 < 0 or r.y0 < 0 or r.x1 >= width or r.y1 >= height:
                raise FormatError(f"mask region {r} outside {width}x{height} frame")

    def to_text(self) -> str:
        return "".join(f"rect {r.x0} {r.y0} {r.x1} {r.y1}\n" for r in self.rects)

    def pixel_mask(self, width: int, height: int) -> np.ndarray:
        """Boolean ``(height, width)`` array, True where excluded."""
        out = np.zeros((height, width), dtype=bool)
        for r in self.rects:
            out[r.y0:r.y1 + 1, r.x0:r.x1 + 1] = True
        return out


def parse_mask(lines: Iterable[str]) -> MaskSpec:
    rects = []
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if parts[0] != "rect" or len(parts) != 5:
            raise FormatError(f"mask line {lineno}: expected 'rect x0 y0 x1 y1', got {line.strip()!r}")
        try:
            rects.append(Rect(*(int(v) for v in parts[1:])))
        except ValueError:
            raise FormatError(f"mask line {lineno}: non-integer bound") from None
    return MaskSpec(rects)


def read_mask(path) -> MaskSpec:
    with open(path, encoding="ascii") as fh:
        return parse_mask(fh)


def write_mask(mask: MaskSpec, path) -> None:
    Path(path).write_text(mask.to_text(), encoding="ascii")


def default_mask(width: int, height: int, band: int = 16, margin: int = 16) -> MaskSpec:
    """Central horizontal and vertical bands of ``2*band`` pixels plus border margins."""
    cx, cy = width // 2, height // 2
    return MaskSpec([
        Rect(0, cy - band, width - 1, cy + band - 1),
        Rect(cx - band, 0, cx + band - 1, height - 1),
        Rect(0, 0, width - 1, margin - 1),
        Rect(0, height - margin, width - 1, height - 1),
        Rect(0, 0, margin - 1, height - 1),
        Rect(width - margin, 0, width - 1, height - 1),
    ])


def center_pixel(v: float) -> int:
    """Nearest pixel index, halves rounded up."""
    return math.floor(v + 0.5)


def cutout_box(x: float, y: float, size: int = CUTOUT_SIZE) -> Rect:
    """Inclusive bounds of the ``size``-square window centered on (x, y)."""
    cx, cy = center_pixel(x), center_pixel(y)
    half = size // 2
    return Rect(cx - half, cy - half, cx - half + size - 1, cy - half + size - 1)


def rejection_reason(source: SourceRecord, mask: MaskSpec, width: int, height: int,
                     size: int = CUTOUT_SIZE) -> str | None:
    """``"edge"`` if the cutout leaves the frame, ``"masked"`` if it touches a
    mask region, otherwise None."""
    box = cutout_box(source.x, source.y, size)
    if box.x0 < 0 or box.y0 < 0 or box.x1 >= width or box.y1 >= height:
        return "edge"
    for r in mask.rects:
        if box.x0 <= r.x1 and r.x0 <= box.x1 and box.y0 <= r.y1 and r.y0 <= box.y1:
            return "masked"
    return None


def apply_mask(sources: Sequence[SourceRecord], mask: MaskSpec, dims: tuple[int, int],
               size: int = CUTOUT_SIZE) -> tuple[list[SourceRecord], list[SourceRecord]]:
    """Partition sources into (kept, rejected). ``dims`` is (width, height)."""
    width, height = dims
    kept, rejected = [], []
    for s in sources:
        (rejected if rejection_reason(s, mask, width, height, size) else kept).append(s)
    return kept, rejected
