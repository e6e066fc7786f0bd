"""Random geometric augmentation of normalized cutouts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates


@dataclass(frozen=True)
class AugmentPolicy:
    hflip: bool = True
    vflip: bool = True
    rot180: bool = True
    flip_p: float = 0.5
    max_shift: int = 6  # pixels, each axis
    max_shear_deg: float = 11.0

    @classmethod
    def identity(cls) -> "AugmentPolicy":
        return cls(hflip=False, vflip=False, rot180=False, max_shift=0, max_shear_deg=0.0)


def hflip(img: np.ndarray) -> np.ndarray:
    return img[:, ::-1].copy()


def vflip(img: np.ndarray) -> np.ndarray:
    return img[::-1, :].copy()


def rot180(img: np.ndarray) -> np.ndarray:
    return img[::-1, ::-1].copy()


def shift_shear(img: np.ndarray, dx: float, dy: float, shear_deg: float) -> np.ndarray:
    """Translate by (dx, dy) and shear horizontally about the image center.

    Output pixel (r, c) samples the input at
    ``(r - dy, c - dx - tan(shear) * (r - center))`` with bilinear
    interpolation; samples outside the image take the nearest edge value.
    """
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    src_r = rows - dy
    src_c = cols - dx - math.tan(math.radians(shear_deg)) * (rows - (h - 1) / 2.0)
    return map_coordinates(img, [src_r, src_c], order=1, mode="nearest")


def augment(pixels: np.ndarray, rng: np.random.Generator, policy: AugmentPolicy = AugmentPolicy()) -> np.ndarray:
    """One random draw of the policy's transforms applied to ``pixels``.

    The same six values are drawn from ``rng`` whatever the policy enables,
    so a given stream always maps to the same geometric choices.
    """
    draws_h, draws_v, draws_r = rng.random(3) < policy.flip_p
    dx, dy = rng.integers(-policy.max_shift, policy.max_shift + 1, size=2)
    shear = rng.uniform(-policy.max_shear_deg, policy.max_shear_deg)

    out = np.asarray(pixels, dtype=np.float64)
    if policy.hflip and draws_h:
        out = hflip(out)
    if policy.vflip and draws_v:
        out = vflip(out)
    if policy.rot180 and draws_r:
        out = rot180(out)
    if dx or dy or shear:
        out = shift_shear(out, float(dx), float(dy), shear)
    else:
        out = out.copy()
    return np.clip(out, 0.0, 1.0)


class Augmenter:
    """Callable ``(pixels, rng) -> pixels`` for the training loop."""

    def __init__(self, policy: AugmentPolicy = AugmentPolicy()):
        self.policy = policy

    def __call__(self, pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if pixels.ndim == 3:
            return augment(pixels[0], rng, self.policy)[None]
        return augment(pixels, rng, self.policy)
