"""Declarative layer stacks and the parameter-count oracle.

A model is described by a :class:`ModelConfig`: an input shape plus an ordered
tuple of :class:`LayerSpec`. The config has a compact text form, e.g.::

    conv:32,relu,maxpool:2,conv:64,relu,maxpool:2,dropout:0.4,flatten,dense:512,relu,dense:1,sigmoid

which is what checkpoints and CLI config files store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

LAYER_KINDS = ("conv", "maxpool", "relu", "dense", "dropout", "flatten", "sigmoid")

REFERENCE_PARAMETER_COUNT = 2_452_993
DROPOUT_P = 0.4
HIDDEN_NODES = 512


@dataclass(frozen=True)
class LayerSpec:
    """One layer. ``size`` is the filter count (conv), pool window (maxpool)
    or node count (dense); ``p`` is the dropout probability."""

    kind: str
    size: int = 0
    kernel: int = 3
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "dense", "maxpool") and self.size < 1:
            raise ConfigError(f"{self.kind} layer needs a positive size")
        if self.kind == "dropout" and not 0.0 <= self.p < 1.0:
            raise ConfigError(f"dropout probability {self.p} outside [0, 1)")

    def to_text(self) -> str:
        if self.kind == "conv":
            return f"conv:{self.size}" if self.kernel == 3 else f"conv:{self.size}x{self.kernel}"
        if self.kind in ("dense", "maxpool"):
            return f"{self.kind}:{self.size}"
        if self.kind == "dropout":
            return f"dropout:{self.p!r}"
        return self.kind

    @classmethod
    def from_text(cls, text: str) -> "LayerSpec":
        kind, _, arg = text.strip().partition(":")
        try:
            if kind == "conv":
                filters, _, kernel = arg.partition("x")
                return cls("conv", size=int(filters), kernel=int(kernel or 3))
            if kind in ("dense", "maxpool"):
                return cls(kind, size=int(arg))
            if kind == "dropout":
                return cls("dropout", p=float(arg))
        except ValueError as exc:
            raise ConfigError(f"bad layer token {text!r}: {exc}") from None
        if arg:
            raise ConfigError(f"layer {kind!r} takes no argument (got {text!r})")
        return cls(kind)


@dataclass(frozen=True)
class ModelConfig:
    name: str
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int] = (1, 64, 64)
    expected_parameters: int | None = field(default=None, compare=False)

    def layers_text(self) -> str:
        return ",".join(layer.to_text() for layer in self.layers)

    @classmethod
    def from_text(cls, name: str, layers: str, input_shape=(1, 64, 64)) -> "ModelConfig":
        tokens = [t for t in layers.split(",") if t.strip()]
        return cls(name, tuple(LayerSpec.from_text(t) for t in tokens), tuple(input_shape))


def shape_chain(config: ModelConfig) -> list[tuple[int, ...]]:
    """Output shape after every layer, starting with the input shape."""
    shape: tuple[int, ...] = tuple(config.input_shape)
    chain = [shape]
    for layer in config.layers:
        if layer.kind == "conv":
            if len(shape) != 3:
                raise ConfigError("conv layer after flatten")
            c, h, w = shape
            if h < layer.kernel or w < layer.kernel:
                raise ConfigError(f"spatial extent {h}x{w} too small for {layer.kernel}x{layer.kernel} conv")
            shape = (layer.size, h - layer.kernel + 1, w - layer.kernel + 1)
        elif layer.kind == "maxpool":
            if len(shape) != 3:
                raise ConfigError("maxpool layer after flatten")
            c, h, w = shape
            if h < layer.size or w < layer.size:
                raise ConfigError(f"spatial extent {h}x{w} too small for pool window {layer.size}")
            shape = (c, h // layer.size, w // layer.size)
        elif layer.kind == "flatten":
            n = 1
            for d in shape:
                n *= d
            shape = (n,)
        elif layer.kind == "dense":
            if len(shape) != 1:
                raise ConfigError("dense layer needs a flattened input")
            shape = (layer.size,)
        chain.append(shape)
    return chain


def parameter_shapes(config: ModelConfig) -> list[tuple[tuple[int, ...], tuple[int, ...]] | None]:
    """Per layer: (weight shape, bias shape) for trainable layers, else None."""
    chain = shape_chain(config)
    shapes = []
    for layer, in_shape in zip(config.layers, chain[:-1]):
        if layer.kind == "conv":
            shapes.append(((layer.size, in_shape[0], layer.kernel, layer.kernel), (layer.size,)))
        elif layer.kind == "dense":
            shapes.append(((layer.size, in_shape[0]), (layer.size,)))
        else:
            shapes.append(None)
    return shapes


def count_parameters(config: ModelConfig) -> int:
    total = 0
    for entry in parameter_shapes(config):
        if entry is None:
            continue
        w_shape, b_shape = entry
        n = 1
        for d in w_shape:
            n *= d
        total += n + b_shape[0]
    return total


def _conv_stack(filters) -> tuple[LayerSpec, ...]:
    layers: list[LayerSpec] = []
    for f in filters:
        layers += [LayerSpec("conv", size=f), LayerSpec("relu"), LayerSpec("maxpool", size=2)]
    layers += [
        LayerSpec("dropout", p=DROPOUT_P),
        LayerSpec("flatten"),
        LayerSpec("dense", size=HIDDEN_NODES),
        LayerSpec("relu"),
        LayerSpec("dense", size=1),
        LayerSpec("sigmoid"),
    ]
    return tuple(layers)


VARIANT_FILTERS = {2: (32, 64), 3: (32, 64, 128), 4: (32, 64, 128, 256)}


def build_paper_model() -> ModelConfig:
    """Three conv/relu/pool blocks (32, 64, 128 filters), dropout 0.4,
    dense 512, single sigmoid output. 2,452,993 trainable parameters."""
    return ModelConfig(
        "conv3",
        _conv_stack(VARIANT_FILTERS[3]),
        expected_parameters=REFERENCE_PARAMETER_COUNT,
    )


def build_variant(layers: int) -> ModelConfig:
    if layers == 3:
        return build_paper_model()
    if layers not in VARIANT_FILTERS:
        raise ConfigError(f"unsupported depth {layers}; expected one of 2, 3, 4")
    return ModelConfig(f"conv{layers}", _conv_stack(VARIANT_FILTERS[layers]))
