"""Network container, loss, optimizer, dropout and the training loop.

All trainable parameters of a :class:`Network` live in one flat float64
buffer; per-layer weights and biases are views into it. Gradients use a
buffer with the same layout, so the optimizer works on two flat arrays.

Randomness never comes from a long-lived generator. Each draw uses a fresh
``numpy.random.Generator`` seeded from ``(seed, purpose, epoch/step, index)``
(see :func:`stream`), which makes runs resumable from a checkpoint and keeps
per-sample work independent of execution order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from . import engine
from .engine import ConvSpec
from .errors import NumericError, ShapeError
from .zoo import ModelConfig, parameter_shapes, shape_chain

log = logging.getLogger(__name__)

BCE_EPS = 1e-12

# stream purposes
SHUFFLE, AUGMENT, DROPOUT, INIT = 1, 2, 3, 4


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    """Independent generator for one ``(seed, purpose, *keys)`` combination."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose, *map(int, keys)]))


# ---------------------------------------------------------------------------
# loss, dropout, initialization


def bce_loss(prediction, label) -> tuple[float, float]:
    """Binary cross-entropy of one prediction. Returns ``(loss, dloss/dprediction)``.

    The prediction is clamped to ``[1e-12, 1 - 1e-12]`` before the log; the
    gradient is evaluated at the clamped value and passed straight through.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    p = min(max(float(prediction), BCE_EPS), 1.0 - BCE_EPS)
    if label == 1:
        return -math.log(p), -1.0 / p
    return -math.log(1.0 - p), 1.0 / (1.0 - p)


def bce_batch(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean BCE over a batch and its gradient w.r.t. each prediction."""
    y = np.asarray(labels, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    p = np.clip(np.asarray(predictions, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    losses = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    grad = (-y / p + (1.0 - y) / (1.0 - p)) / len(y)
    return float(losses.mean()), grad


def dropout_forward(x, p: float, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(output, mask)``; ``mask`` is None when inactive."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0, 1)")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = engine.as_tensor(x)
    if mode == "eval" or p == 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout needs a generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(grad_out, mask) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


def init_weights(weight_shape, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """He-normal weights (std ``sqrt(2 / fan_in)``) and zero biases."""
    fan_in = int(np.prod(weight_shape[1:]))
    weights = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=weight_shape)
    return weights, np.zeros(weight_shape[0])


# ---------------------------------------------------------------------------
# network


class Network:
    """Sequential network built from a :class:`ModelConfig`.

    Inputs are batches ``(N, C, H, W)``; a single ``(C, H, W)`` image or
    ``(H, W)`` grayscale image is promoted to a batch of one.
    """

    def __init__(self, config: ModelConfig, params: np.ndarray | None = None):
        self.config = config
        self.shapes = shape_chain(config)
        self._slots: list[tuple[slice, tuple, slice, tuple] | None] = []
        offset = 0
        for entry in parameter_shapes(config):
            if entry is None:
                self._slots.append(None)
                continue
            w_shape, b_shape = entry
            nw, nb = int(np.prod(w_shape)), b_shape[0]
            self._slots.append((slice(offset, offset + nw), w_shape,
                                slice(offset + nw, offset + nw + nb), b_shape))
            offset += nw + nb
        self.size = offset
        if params is None:
            params = np.zeros(offset)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (offset,):
            raise ShapeError(f"parameter vector has {params.size} values, config needs {offset}")
        self.params = params
        self._convs = {
            i: ConvSpec(self.shapes[i][0], layer.size, layer.kernel, layer.kernel)
            for i, layer in enumerate(config.layers) if layer.kind == "conv"
        }

    @classmethod
    def initialized(cls, config: ModelConfig, seed: int) -> "Network":
        net = cls(config)
        for i, slot in enumerate(net._slots):
            if slot is None:
                continue
            w, b = init_weights(slot[1], stream(seed, INIT, i))
            net.weight(i)[...] = w
            net.bias(i)[...] = b
        return net

    def copy(self) -> "Network":
        return Network(self.config, self.params.copy())

    def weight(self, i: int, buf: np.ndarray | None = None) -> np.ndarray:
        ws, wshape, _, _ = self._slots[i]
        return (self.params if buf is None else buf)[ws].reshape(wshape)

    def bias(self, i: int, buf: np.ndarray | None = None) -> np.ndarray:
        _, _, bs, bshape = self._slots[i]
        return (self.params if buf is None else buf)[bs].reshape(bshape)

    def trainable_layers(self) -> list[int]:
        return [i for i, s in enumerate(self._slots) if s is not None]

    def _as_batch(self, x) -> np.ndarray:
        x = engine.as_tensor(x, name="input")
        want = tuple(self.config.input_shape)
        if x.ndim == 2 and want[0] == 1:
            x = x[None, None]
        elif x.ndim == 3 and x.shape == want:
            x = x[None]
        elif x.ndim == 3 and want[0] == 1:
            x = x[:, None]  # grayscale batch (N, H, W)
        if x.ndim != 4 or x.shape[1:] != want:
            raise ShapeError(f"input shape {x.shape} incompatible with model input {want}")
        return x

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None,
                stop_before_sigmoid: bool = False):
        """Run the stack. Returns ``(output, caches)`` where caches feed :meth:`backward`."""
        h = self._as_batch(x)
        caches = []
        for i, layer in enumerate(self.config.layers):
            if stop_before_sigmoid and layer.kind == "sigmoid":
                break
            kind = layer.kind
            if kind == "conv":
                caches.append(h)
                h = engine.conv2d_forward(h, self.weight(i), self.bias(i), self._convs[i])
            elif kind == "relu":
                caches.append(h)
                h = engine.relu(h)
            elif kind == "maxpool":
                shape = h.shape
                h, idx = engine.maxpool2d_forward(h, layer.size)
                caches.append((idx, shape))
            elif kind == "dropout":
                h, mask = dropout_forward(h, layer.p, "train" if train else "eval", rng)
                caches.append(mask)
            elif kind == "flatten":
                caches.append(h.shape)
                h = h.reshape(h.shape[0], -1)
            elif kind == "dense":
                caches.append(h)
                h = engine.dense_forward(h, self.weight(i), self.bias(i))
            elif kind == "sigmoid":
                h = engine.sigmoid(h)
                caches.append(h)
        engine.check_finite(h, "network output")
        return h, caches

    def backward(self, grad_out, caches, want_params: bool = True, out: np.ndarray | None = None):
        """Backpropagate ``grad_out`` through the cached forward pass.

        Returns ``(grad_input, grad_params)``; ``grad_params`` is a flat
        buffer laid out like :attr:`params` (None if ``want_params`` is false).
        Every slot of ``out``, when given, is overwritten.
        """
        grads = None
        if want_params:
            grads = np.empty(self.size) if out is None else out
        g = engine.as_tensor(grad_out)
        for i in range(len(caches) - 1, -1, -1):
            layer, cache = self.config.layers[i], caches[i]
            kind = layer.kind
            if kind == "conv":
                g, gw, gb = engine.conv2d_backward(g, cache, self.weight(i), self._convs[i])
                if want_params:
                    self.weight(i, grads)[...] = gw
                    self.bias(i, grads)[...] = gb
            elif kind == "relu":
                g = engine.relu_backward(g, cache)
            elif kind == "maxpool":
                idx, shape = cache
                g = engine.maxpool2d_backward(g, idx, shape, layer.size)
            elif kind == "dropout":
                g = dropout_backward(g, cache)
            elif kind == "flatten":
                g = g.reshape(cache)
            elif kind == "dense":
                g, gw, gb = engine.dense_backward(g, cache, self.weight(i))
                if want_params:
                    self.weight(i, grads)[...] = gw
                    self.bias(i, grads)[...] = gb
            elif kind == "sigmoid":
                g = engine.sigmoid_backward(g, cache)
        return g, grads

    def predict(self, x, batch_size: int = 32) -> np.ndarray:
        """Eval-mode probabilities, one per input image."""
        xb = self._as_batch(x)
        out = [self.forward(xb[k:k + batch_size])[0].reshape(-1)
               for k in range(0, len(xb), batch_size)]
        return np.concatenate(out) if out else np.zeros(0)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 4
    epochs: int = 100
    steps_per_epoch: int | None = None  # None: len(train) // batch_size
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8


def adam_step(params, grads, moments, t: int, cfg: TrainConfig):
    """Functional Adam update. Returns ``(new_params, (m, v))``."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    m, v = (np.asarray(a, dtype=np.float64) for a in moments)
    if not (params.shape == grads.shape == m.shape == v.shape):
        raise ShapeError(f"shape mismatch: params {params.shape}, grads {grads.shape}, "
                         f"moments {m.shape}/{v.shape}")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = b1 * m + (1.0 - b1) * grads
    v = b2 * v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    return params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon), (m, v)


@numba.njit(cache=True)
def _adam_kernel(params, grads, m, v, lr, b1, b2, bc1, bc2, eps):
    for i in range(params.shape[0]):
        g = grads[i]
        m[i] = b1 * m[i] + (1.0 - b1) * g
        v[i] = b2 * v[i] + (1.0 - b2) * g * g
        params[i] = params[i] - lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)


class Adam:
    """In-place Adam over flat buffers.

    Produces the same values as :func:`adam_step`, element for element, in a
    single fused pass.
    """

    def __init__(self, size: int, cfg: TrainConfig, m=None, v=None, t: int = 0):
        self.cfg = cfg
        self.m = np.zeros(size) if m is None else np.array(m, dtype=np.float64)
        self.v = np.zeros(size) if v is None else np.array(v, dtype=np.float64)
        self.t = t

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        cfg = self.cfg
        self.t += 1
        _adam_kernel(params, grads, self.m, self.v, cfg.learning_rate,
                     cfg.adam_beta1, cfg.adam_beta2,
                     1.0 - cfg.adam_beta1 ** self.t, 1.0 - cfg.adam_beta2 ** self.t,
                     cfg.adam_epsilon)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainState:
    """Everything beyond the weights needed to resume training exactly."""

    optimizer: Adam
    epoch: int = 0  # completed epochs
    history: list[EpochRecord] = field(default_factory=list)


def evaluate(model: Network, x, y, batch_size: int = 32) -> tuple[float, float]:
    """Eval-mode mean BCE and accuracy at threshold 0.5."""
    y = np.asarray(y)
    if len(y) == 0:
        return float("nan"), float("nan")
    p = model.predict(x, batch_size)
    loss, _ = bce_batch(p, y)
    return loss, float(np.mean((p >= 0.5) == (y == 1)))


AugmentFn = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def train(model: Network, train_set, val_set, augmenter: AugmentFn | None, cfg: TrainConfig,
          state: TrainState | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None):
    """Minibatch Adam training. Updates ``model.params`` in place.

    ``train_set``/``val_set`` are ``(images, labels)`` pairs with images of
    shape ``(N, H, W)`` or ``(N, C, H, W)`` in [0, 1]. Runs ``cfg.epochs``
    epochs on top of whatever ``state`` has already completed. Returns
    ``(model, state)``; ``state.history`` holds one record per epoch.
    """
    x_train, y_train = train_set
    x_train = model._as_batch(x_train)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_val, y_val = val_set
    n = len(y_train)
    if state is None:
        state = TrainState(Adam(model.size, cfg))
    if cfg.epochs == 0:
        return model, state
    if n == 0:
        raise ValueError("empty training set")
    if len(x_train) != n:
        raise ShapeError(f"{len(x_train)} training images but {n} labels")
    steps = cfg.steps_per_epoch or n // cfg.batch_size
    if steps < 1 or steps * cfg.batch_size > n:
        raise ValueError(f"{steps} steps of {cfg.batch_size} exceed {n} training samples")

    grad_buf = np.empty(model.size)
    for _ in range(cfg.epochs):
        epoch = state.epoch
        order = stream(cfg.seed, SHUFFLE, epoch).permutation(n)
        loss_sum, correct, seen = 0.0, 0, 0
        for step in range(steps):
            idx = order[step * cfg.batch_size:(step + 1) * cfg.batch_size]
            batch = x_train[idx]
            if augmenter is not None:
                batch = np.stack([
                    augmenter(img, stream(cfg.seed, AUGMENT, epoch, step * cfg.batch_size + k))
                    for k, img in enumerate(batch)
                ])
            labels = y_train[idx]
            global_step = state.optimizer.t + 1
            try:
                out, caches = model.forward(batch, train=True, rng=stream(cfg.seed, DROPOUT, global_step))
            except NumericError as exc:
                raise NumericError(f"epoch {epoch + 1}, step {global_step}: {exc}") from None
            probs = out.reshape(-1)
            loss, grad = bce_batch(probs, labels)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, step {global_step}")
            _, grads = model.backward(grad.reshape(out.shape), caches, out=grad_buf)
            state.optimizer.step(model.params, grads)
            loss_sum += loss * len(idx)
            correct += int(np.sum((probs >= 0.5) == (labels == 1)))
            seen += len(idx)
        val_loss, val_acc = evaluate(model, x_val, y_val)
        record = EpochRecord(epoch + 1, loss_sum / seen, correct / seen, val_loss, val_acc)
        state.history.append(record)
        state.epoch += 1
        log.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                 record.epoch, record.train_loss, record.train_acc, val_loss, val_acc)
        if on_epoch is not None:
            on_epoch(record)
    return model, state
