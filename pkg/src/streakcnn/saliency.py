"""Vanilla-gradient saliency maps."""

from __future__ import annotations

import numpy as np

from .nn import Network

TARGET_SIGN = {"star": 1.0, "artefact": -1.0}


def saliency_map(model: Network, pixels, target: str = "star") -> np.ndarray:
    """Positive part of d(class score)/d(pixels), scaled so the maximum is 1.

    The class score is the pre-sigmoid logit for ``target="star"`` and its
    negation for ``target="artefact"``. Dropout runs in eval mode.
    """
    sign = TARGET_SIGN[target]
    logit, caches = model.forward(pixels, train=False, stop_before_sigmoid=True)
    grad, _ = model.backward(np.full(logit.shape, sign), caches, want_params=False)
    grad = grad.reshape(grad.shape[-2:])
    smap = np.maximum(grad, 0.0)
    peak = smap.max()
    return smap / peak if peak > 0 else smap


def saliency_mass_fraction(smap: np.ndarray, footprint: np.ndarray) -> float:
    total = float(smap.sum())
    if total <= 0.0:
        return 0.0
    return float(smap[np.asarray(footprint, dtype=bool)].sum()) / total


def to_bytes(smap: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] map to 8 bits, halves rounded up."""
    return np.floor(np.clip(smap, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
