"""Cutout extraction, 8-bit stretch, star sampling and normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ShapeError
from .catalog import SourceRecord
from .mask import CUTOUT_SIZE, cutout_box

STAR, ARTEFACT = 1, 0


@dataclass
class Sample:
    pixels: np.ndarray  # (64, 64) float64 in [0, 1]
    label: int
    source_id: int = -1
    frame_id: str = ""

    def __post_init__(self):
        if self.pixels.shape != (CUTOUT_SIZE, CUTOUT_SIZE):
            raise ShapeError(f"sample must be {CUTOUT_SIZE}x{CUTOUT_SIZE}, got {self.pixels.shape}")
        if self.label not in (STAR, ARTEFACT):
            raise ValueError(f"label must be 0 (artefact) or 1 (star), got {self.label}")


def stretch_to_bytes(window: np.ndarray) -> np.ndarray:
    """Linear min-max stretch to [0, 255], rounded half up. Constant windows give zeros."""
    window = np.asarray(window, dtype=np.float64)
    lo, hi = window.min(), window.max()
    if not hi > lo:
        return np.zeros(window.shape, dtype=np.uint8)
    scaled = (window - lo) / (hi - lo) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def extract_cutout(frame: np.ndarray, x: float, y: float, size: int = CUTOUT_SIZE) -> np.ndarray:
    """8-bit stretched window centered on the pixel nearest (x, y)."""
    height, width = frame.shape
    box = cutout_box(x, y, size)
    if box.x0 < 0 or box.y0 < 0 or box.x1 >= width or box.y1 >= height:
        raise ShapeError(f"cutout box {box} leaves the {width}x{height} frame")
    return stretch_to_bytes(frame[box.y0:box.y1 + 1, box.x0:box.x1 + 1])


def normalize(cutout) -> np.ndarray:
    return np.asarray(cutout, dtype=np.float64) / 255.0


def select_stars_by_magnitude(sources: Sequence[SourceRecord], bin_width: float = 1.0,
                              per_bin: int = 1, max_bins: int = 5) -> list[SourceRecord]:
    """Brightest ``per_bin`` sources from each of the first ``max_bins``
    populated magnitude bins; bins start at ``floor(min mag)``."""
    if not sources:
        return []
    anchor = math.floor(min(s.mag for s in sources))
    bins: dict[int, list[SourceRecord]] = {}
    for s in sources:
        bins.setdefault(int((s.mag - anchor) // bin_width), []).append(s)
    picks = []
    for key in sorted(bins)[:max_bins]:
        members = sorted(bins[key], key=lambda s: (s.mag, s.id))
        picks.extend(members[:per_bin])
    return picks
