"""Differentiable numeric kernels on dense float64 arrays.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C order.
Every spatial kernel accepts either a single image ``(C, H, W)`` or a batch
``(N, C, H, W)`` and returns the same rank it was given. Forward functions
return whatever the matching backward needs as an explicit value; nothing is
cached on module state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericError, ShapeError

DTYPE = np.float64


def as_tensor(values, *, ndim: int | None = None, name: str = "tensor") -> np.ndarray:
    """Coerce ``values`` to a contiguous float64 array and validate it."""
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim} dimensions, got shape {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {what}")
    return arr


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3
    stride: int = 1
    padding: str = "valid"

    def __post_init__(self):
        if self.padding != "valid":
            raise ValueError(f"unsupported padding {self.padding!r}; only 'valid'")
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")
        if min(self.in_channels, self.out_channels, self.kernel_h, self.kernel_w) < 1:
            raise ValueError("channel and kernel extents must be positive")

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        return (h - self.kernel_h) // self.stride + 1, (w - self.kernel_w) // self.stride + 1

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)


def _batched(x: np.ndarray, name: str) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"{name}: expected (C,H,W) or (N,C,H,W), got shape {x.shape}")


def _check_conv_shapes(x: np.ndarray, weights: np.ndarray, spec: ConvSpec) -> None:
    if weights.shape != spec.weight_shape:
        raise ShapeError(f"weights: shape {weights.shape} does not match spec {spec.weight_shape}")
    if x.shape[1] != spec.in_channels:
        raise ShapeError(f"input channel axis: got {x.shape[1]}, spec expects {spec.in_channels}")
    if x.shape[2] < spec.kernel_h:
        raise ShapeError(f"input height axis: {x.shape[2]} smaller than kernel {spec.kernel_h}")
    if x.shape[3] < spec.kernel_w:
        raise ShapeError(f"input width axis: {x.shape[3]} smaller than kernel {spec.kernel_w}")


def conv2d_forward(x, weights, bias, spec: ConvSpec) -> np.ndarray:
    """Valid, stride-1 cross-correlation plus per-channel bias."""
    x = as_tensor(x, name="input")
    weights = as_tensor(weights, ndim=4, name="weights")
    bias = as_tensor(bias, ndim=1, name="bias")
    xb, single = _batched(x, "input")
    _check_conv_shapes(xb, weights, spec)
    if bias.shape[0] != spec.out_channels:
        raise ShapeError(f"bias: length {bias.shape[0]} != out_channels {spec.out_channels}")

    # (N, C, H', W', kh, kw) strided view; tensordot contracts C, kh, kw.
    windows = sliding_window_view(xb, (spec.kernel_h, spec.kernel_w), axis=(2, 3))
    out = np.tensordot(windows, weights, axes=([1, 4, 5], [1, 2, 3]))  # (N, H', W', Cout)
    out += bias
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
    return out[0] if single else out


def conv2d_backward(grad_out, cached_input, weights, spec: ConvSpec):
    """Gradients of :func:`conv2d_forward` w.r.t. input, weights and bias."""
    x = as_tensor(cached_input, name="cached_input")
    weights = as_tensor(weights, ndim=4, name="weights")
    g = as_tensor(grad_out, name="grad_out")
    xb, single = _batched(x, "cached_input")
    gb, _ = _batched(g, "grad_out")
    _check_conv_shapes(xb, weights, spec)
    n, _, h, w = xb.shape
    oh, ow = spec.output_hw(h, w)
    expected = (n, spec.out_channels, oh, ow)
    if gb.shape != expected:
        raise ShapeError(f"grad_out: shape {gb.shape} != forward output shape {expected}")

    windows = sliding_window_view(xb, (spec.kernel_h, spec.kernel_w), axis=(2, 3))
    grad_w = np.tensordot(gb, windows, axes=([0, 2, 3], [0, 2, 3]))  # (Cout, C, kh, kw)
    grad_b = gb.sum(axis=(0, 2, 3))

    # grad_cols[n, c, i, j, y, x] = sum_o g[n, o, y, x] * W[o, c, i, j]
    grad_cols = np.tensordot(weights, gb, axes=([0], [1]))  # (C, kh, kw, N, H', W')
    grad_in = np.zeros_like(xb)
    for i in range(spec.kernel_h):
        for j in range(spec.kernel_w):
            grad_in[:, :, i:i + oh, j:j + ow] += grad_cols[:, i, j].transpose(1, 0, 2, 3)
    return (grad_in[0] if single else grad_in), np.ascontiguousarray(grad_w), grad_b


def maxpool2d_forward(x, window: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped.

    Returns the pooled tensor and the argmax position inside each window
    (row-major index in ``[0, window**2)``). Ties resolve to the first
    maximum in row-major order.
    """
    x = as_tensor(x, name="input")
    xb, single = _batched(x, "input")
    n, c, h, w = xb.shape
    oh, ow = h // window, w // window
    if oh == 0 or ow == 0:
        raise ShapeError(f"input spatial extent {h}x{w} smaller than pool window {window}")
    blocks = xb[:, :, :oh * window, :ow * window].reshape(n, c, oh, window, ow, window)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, window * window)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    if single:
        return out[0], idx[0]
    return out, idx


def maxpool2d_backward(grad_out, argmax, input_shape, window: int = 2) -> np.ndarray:
    g = as_tensor(grad_out, name="grad_out")
    single = g.ndim == 3
    gb = g[None] if single else g
    idx = argmax[None] if single else argmax
    shape = tuple(input_shape)
    full = (1,) + shape if single else shape
    n, c, h, w = full
    oh, ow = h // window, w // window
    if gb.shape != (n, c, oh, ow) or idx.shape != gb.shape:
        raise ShapeError(f"grad_out: shape {gb.shape} does not match pooled shape {(n, c, oh, ow)}")
    blocks = np.zeros((n, c, oh, ow, window * window), dtype=DTYPE)
    np.put_along_axis(blocks, idx[..., None], gb[..., None], axis=-1)
    blocks = blocks.reshape(n, c, oh, ow, window, window).transpose(0, 1, 2, 4, 3, 5)
    grad_in = np.zeros(full, dtype=DTYPE)
    grad_in[:, :, :oh * window, :ow * window] = blocks.reshape(n, c, oh * window, ow * window)
    return grad_in[0] if single else grad_in


def dense_forward(x, weights, bias) -> np.ndarray:
    """Affine map ``W @ x + b`` for ``x`` of shape ``(n,)`` or ``(N, n)``."""
    x = as_tensor(x, name="input")
    weights = as_tensor(weights, ndim=2, name="weights")
    bias = as_tensor(bias, ndim=1, name="bias")
    m, n = weights.shape
    if x.shape[-1] != n or x.ndim not in (1, 2):
        raise ShapeError(f"input: last axis {x.shape[-1]} != weights input axis {n}")
    if bias.shape[0] != m:
        raise ShapeError(f"bias: length {bias.shape[0]} != weights output axis {m}")
    return x @ weights.T + bias


def dense_backward(grad_out, cached_input, weights):
    g = as_tensor(grad_out, name="grad_out")
    x = as_tensor(cached_input, name="cached_input")
    weights = as_tensor(weights, ndim=2, name="weights")
    if g.shape[-1] != weights.shape[0] or g.shape[:-1] != x.shape[:-1]:
        raise ShapeError(f"grad_out: shape {g.shape} inconsistent with input {x.shape}")
    grad_in = g @ weights
    if g.ndim == 1:
        return grad_in, np.outer(g, x), g.copy()
    return grad_in, g.T @ x, g.sum(axis=0)


def relu(x) -> np.ndarray:
    x = as_tensor(x)
    return np.maximum(x, 0.0)


def relu_backward(grad_out, cached_input) -> np.ndarray:
    return np.where(as_tensor(cached_input) > 0.0, as_tensor(grad_out), 0.0)


def sigmoid(x) -> np.ndarray:
    x = as_tensor(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad_out, cached_output) -> np.ndarray:
    s = as_tensor(cached_output)
    return as_tensor(grad_out) * s * (1.0 - s)
