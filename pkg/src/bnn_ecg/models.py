"""Network descriptions and builders for the baseline and binarized classifiers.

The baseline is seven convolutional blocks and a bias-free dense layer::

    Conv -> BN -> MaxPool -> ReLU      (blocks 1-6)
    Conv -> BN -> MaxPool              (block 7)
    Dropout -> Dense(216 -> 5)

The binarized variants move BN after pooling and binarize activations::

    BinConv -> MaxPool -> BN -> Sign   (blocks 1-7)
    Dropout -> BinDense(216 -> 5)

Block 1 of a binarized model convolves binary weights with the real-valued
ECG input. Every later convolution, and the dense layer, sees bipolar input
and can run on the XNOR/popcount kernel at inference time.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .layers import (
    FIXED_ZERO,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    Flatten,
    MaxPool1d,
    ReLU,
    SignActivation,
    SteKind,
    ThresholdMode,
    conv_out_length,
    pool_out_length,
)

INPUT_LENGTH = 3600
N_CLASSES = 5

# (out_ch, in_ch, kernel, stride, padding, pool_kernel, pool_stride)
BLOCKS = (
    (8, 1, 16, 2, 7, 8, 4),
    (12, 8, 12, 2, 5, 4, 2),
    (32, 12, 9, 1, 4, 5, 2),
    (64, 32, 7, 1, 3, 4, 2),
    (64, 64, 5, 1, 2, 2, 2),
    (64, 64, 3, 1, 1, 2, 2),
    (72, 64, 3, 1, 1, 2, 2),
)
DENSE_IN = 216


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_ch: int = 0
    in_ch: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    label: int | None = None  # 1-based row of the layer table (conv/pool/dense)


@dataclass(frozen=True)
class BinConfig:
    ste_weights: SteKind
    ste_activations: SteKind
    threshold: ThresholdMode = FIXED_ZERO


VARIANTS = {
    "bttn": BinConfig(SteKind.TANH, SteKind.TANH),
    "btpn": BinConfig(SteKind.TANH, SteKind.POLY),
    "bppn": BinConfig(SteKind.POLY, SteKind.POLY),
    "bptn": BinConfig(SteKind.POLY, SteKind.TANH),
    "btpn-alpha": BinConfig(SteKind.TANH, SteKind.POLY, ThresholdMode(learnable=True)),
}
MODEL_NAMES = ("baseline",) + tuple(VARIANTS)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    binarization: BinConfig | None = None
    input_channels: int = 1
    input_length: int = INPUT_LENGTH
    dropout_rate: float = 0.5
    name: str = "baseline"

    @property
    def binarized(self):
        return self.binarization is not None

    def table_rows(self):
        """Conv, pool and dense descriptors in layer-table order."""
        return [l for l in self.layers if l.label is not None]


def _table_layers(pool_first_bn):
    layers, label = [], 1
    for i, (o, c, k, s, p, pk, ps) in enumerate(BLOCKS):
        conv = LayerSpec("conv", o, c, k, s, p, label)
        pool = LayerSpec("maxpool", o, o, pk, ps, 0, label + 1)
        bn = LayerSpec("bn", o, o)
        if pool_first_bn:
            layers += [conv, pool, bn, LayerSpec("sign", o, o)]
        else:
            layers += [conv, bn, pool]
            if i < len(BLOCKS) - 1:
                layers.append(LayerSpec("relu", o, o))
        label += 2
    layers += [
        LayerSpec("flatten"),
        LayerSpec("dropout"),
        LayerSpec("dense", N_CLASSES, DENSE_IN, label=label),
    ]
    return tuple(layers)


def baseline_spec(dropout_rate=0.5):
    return NetworkSpec(_table_layers(False), None, dropout_rate=dropout_rate, name="baseline")


def binarized_spec(cfg, dropout_rate=0.5, name=None):
    if isinstance(cfg, str):
        name, cfg = cfg, VARIANTS[cfg]
    if name is None:
        name = next((k for k, v in VARIANTS.items() if v == cfg), "binarized")
    return NetworkSpec(_table_layers(True), cfg, dropout_rate=dropout_rate, name=name)


def spec_for(name, dropout_rate=0.5):
    name = name.lower()
    if name == "baseline":
        return baseline_spec(dropout_rate)
    if name not in VARIANTS:
        raise InvalidArgumentError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    return binarized_spec(name, dropout_rate)


def activation_shapes(spec, input_length=None):
    """``(channels, length)`` after every layer of ``spec``; flatten reports ``(features, 1)``."""
    length = spec.input_length if input_length is None else input_length
    if length < 1:
        raise ShapeError(f"input length must be positive, got {length}")
    channels = spec.input_channels
    shapes = []
    for l in spec.layers:
        if l.kind == "conv":
            length = conv_out_length(length, l.kernel, l.stride, l.padding)
            channels = l.out_ch
        elif l.kind == "maxpool":
            length = pool_out_length(length, l.kernel, l.stride)
        elif l.kind == "flatten":
            channels, length = channels * length, 1
        elif l.kind == "dense":
            if channels * length != l.in_ch:
                raise ShapeError(f"dense layer expects {l.in_ch} inputs, pipeline gives {channels * length}")
            channels, length = l.out_ch, 1
        if length < 1:
            raise ShapeError(f"layer {l.kind} (label {l.label}) produces length {length}")
        shapes.append((channels, length))
    return shapes


def shape_plan(spec, input_length=None):
    """Output length after each conv/pool layer, in layer-table order."""
    shapes = activation_shapes(spec, input_length)
    return [s[1] for l, s in zip(spec.layers, shapes) if l.kind in ("conv", "maxpool")]


class Network:
    """Trainable state for one :class:`NetworkSpec`."""

    def __init__(self, spec, layers):
        self.spec = spec
        self.layers = layers

    @property
    def name(self):
        return self.spec.name

    def forward(self, x, train=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def forward_packed(self, x):
        for layer in self.layers:
            x = layer.forward_packed(x)
        return x

    def named_params(self):
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield (i, name), layer, name, value

    def n_params(self):
        return sum(v.size for *_, v in self.named_params())

    def set_smooth(self, smooth=True):
        """Swap Sign for its surrogate in every binarizing layer (gradient checks)."""
        for layer in self.layers:
            if hasattr(layer, "smooth"):
                layer.smooth = smooth

    def logits(self, x, packed=False, batch_size=256):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[:, None, :]
        outs = []
        for start in range(0, len(x), batch_size):
            chunk = x[start : start + batch_size]
            outs.append(self.forward_packed(chunk) if packed else self.forward(chunk))
        return np.concatenate(outs) if outs else np.zeros((0, N_CLASSES), dtype=self.dtype)

    def predict(self, x, packed=False):
        return self.logits(x, packed=packed).argmax(axis=1)

    @property
    def dtype(self):
        return self.layers[0].params["weight"].dtype


def build_network(spec, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    cfg = spec.binarization
    layers = []
    first_conv = True
    for l in spec.layers:
        if l.kind == "conv":
            layers.append(Conv1d(
                l.in_ch, l.out_ch, l.kernel, l.stride, l.padding,
                binary=cfg is not None,
                ste=cfg.ste_weights if cfg else SteKind.TANH,
                binary_input=cfg is not None and not first_conv,
                rng=rng, dtype=dtype,
            ))
            first_conv = False
        elif l.kind == "bn":
            layers.append(BatchNorm1d(l.out_ch, dtype=dtype))
        elif l.kind == "maxpool":
            layers.append(MaxPool1d(l.kernel, l.stride))
        elif l.kind == "relu":
            layers.append(ReLU())
        elif l.kind == "sign":
            layers.append(SignActivation(l.out_ch, cfg.ste_activations, cfg.threshold, dtype=dtype))
        elif l.kind == "flatten":
            layers.append(Flatten())
        elif l.kind == "dropout":
            layers.append(Dropout(spec.dropout_rate))
        elif l.kind == "dense":
            layers.append(Dense(
                l.in_ch, l.out_ch,
                binary=cfg is not None,
                ste=cfg.ste_weights if cfg else SteKind.TANH,
                weight_alpha=cfg.threshold if cfg else None,
                rng=rng, dtype=dtype,
            ))
        else:
            raise InvalidArgumentError(f"unknown layer kind {l.kind!r}")
    return Network(spec, layers)


def build_baseline(seed=0, dtype=np.float32, dropout_rate=0.5):
    return build_network(baseline_spec(dropout_rate), seed, dtype)


def build_binarized(cfg, seed=0, dtype=np.float32, dropout_rate=0.5):
    return build_network(binarized_spec(cfg, dropout_rate), seed, dtype)


def build(name, seed=0, dtype=np.float32, dropout_rate=0.5):
    return build_network(spec_for(name, dropout_rate), seed, dtype)


def infer(net, segment, packed=True):
    """Class scores (raw logits) for one normalized 3600-sample segment."""
    segment = np.asarray(segment)
    if segment.shape != (net.spec.input_length,):
        raise InvalidArgumentError(
            f"segment must have {net.spec.input_length} samples, got shape {segment.shape}"
        )
    x = segment.astype(net.dtype)[None, None, :]
    out = net.forward_packed(x) if packed else net.forward(x)
    return out[0]
