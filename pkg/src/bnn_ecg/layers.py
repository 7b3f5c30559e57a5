"""Layers with explicit forward/backward passes for 1-D signals.

Activations are ``(batch, channels, length)`` arrays; the dense layer takes
``(batch, features)``. Every layer keeps what its backward pass needs from
the most recent training forward call.

Binarized layers keep real "shadow" values and recompute their {-1, +1}
view on every forward pass. Gradients reach the shadow values through the
derivative of a smooth surrogate (tanh or the piecewise quadratic ``F``),
the straight-through estimator. Setting ``smooth = True`` on a binarizing
layer makes its forward pass use the surrogate itself instead of Sign, which
is what finite-difference gradient checks differentiate against.
"""

import enum
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .bits import PackedBitTensor, _pack_bool, xnor_popcount_matmul
from .errors import InvalidArgumentError, ShapeError, StateError


class SteKind(enum.Enum):
    TANH = "tanh"
    POLY = "poly"


@dataclass(frozen=True)
class ThresholdMode:
    """Activation threshold: fixed at zero, or one learnable value per channel."""

    learnable: bool = False
    initial: float = 0.0


FIXED_ZERO = ThresholdMode()


def _channel_view(alpha, ndim):
    alpha = np.asarray(alpha)
    if alpha.ndim == 0 or ndim < 2:
        return alpha
    return alpha.reshape(alpha.shape + (1,))


def sign_binarize(x, alpha=0.0):
    """+1 where ``x >= alpha`` and -1 elsewhere.

    ``alpha`` is a scalar or one threshold per channel, where the channel axis
    is the second-to-last axis of ``x``.
    """
    x = np.asarray(x)
    a = _channel_view(alpha, x.ndim)
    return np.where(x >= a, 1.0, -1.0).astype(x.dtype if x.dtype.kind == "f" else float)


def surrogate(x, kind):
    """Smooth stand-in for Sign whose derivative drives backpropagation."""
    x = np.asarray(x)
    if kind is SteKind.TANH:
        return np.tanh(x)
    c = np.clip(x, -1.0, 1.0)
    return np.where(c < 0, 2 * c + c * c, 2 * c - c * c).astype(x.dtype if x.dtype.kind == "f" else float)


def ste_gradient(x, kind):
    """Derivative of :func:`surrogate` at ``x``.

    >>> float(ste_gradient(0.0, SteKind.POLY))
    2.0
    """
    x = np.asarray(x)
    if kind is SteKind.TANH:
        t = np.tanh(x)
        return 1.0 - t * t
    g = np.where(x < 0, 2 + 2 * x, 2 - 2 * x)
    return np.where((x >= -1) & (x <= 1), g, 0.0).astype(x.dtype if x.dtype.kind == "f" else float)


def conv_out_length(length, kernel, stride, padding):
    return (length + 2 * padding - kernel) // stride + 1


def pool_out_length(length, kernel, stride):
    return (length - kernel) // stride + 1


def _im2col(x, kernel, stride, padding):
    n, c, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    win = sliding_window_view(xp, kernel, axis=2)[:, :, ::stride, :]
    lout = win.shape[2]
    return win.transpose(0, 2, 1, 3).reshape(n * lout, c * kernel), lout


def conv1d(x, weight, stride=1, padding=0):
    """Cross-correlation of ``(N, C, L)`` input with ``(O, C, K)`` weights, no bias.

    Returns the output and the column matrix the backward pass reuses.
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise InvalidArgumentError(f"conv1d expects (batch, channels, length), got {x.shape}")
    o, c, k = weight.shape
    if x.shape[1] != c:
        raise InvalidArgumentError(f"input has {x.shape[1]} channels, layer expects {c}")
    if conv_out_length(x.shape[2], k, stride, padding) < 1:
        raise ShapeError(
            f"length {x.shape[2]} too short for kernel {k}, stride {stride}, padding {padding}"
        )
    cols, lout = _im2col(x, k, stride, padding)
    out = cols @ weight.reshape(o, c * k).T
    return np.ascontiguousarray(out.reshape(x.shape[0], lout, o).transpose(0, 2, 1)), cols


def conv1d_grads(grad_out, cols, weight, in_shape, stride, padding):
    """Gradients of :func:`conv1d` w.r.t. its input and weights."""
    n, c, length = in_shape
    o, _, k = weight.shape
    lout = grad_out.shape[2]
    g2 = grad_out.transpose(0, 2, 1).reshape(n * lout, o)
    grad_w = (g2.T @ cols).reshape(weight.shape)
    gcols = (g2 @ weight.reshape(o, c * k)).reshape(n, lout, c, k)
    grad_xp = np.zeros((n, c, length + 2 * padding), dtype=grad_out.dtype)
    span = stride * (lout - 1) + 1
    for j in range(k):
        grad_xp[:, :, j : j + span : stride] += gcols[:, :, :, j].transpose(0, 2, 1)
    return grad_xp[:, :, padding : padding + length], grad_w


def conv1d_packed(x_signs, weight_bits, kernel, stride=1, padding=0):
    """XNOR/popcount convolution of bipolar input with packed bipolar weights.

    ``x_signs`` holds only -1/+1. Zero padding is honoured exactly through a
    validity mask, so the result equals the real convolution of the same
    operands. Output is integer valued.
    """
    n, c, length = x_signs.shape
    if conv_out_length(length, kernel, stride, padding) < 1:
        raise ShapeError(f"length {length} too short for kernel {kernel}")
    cols, lout = _im2col(x_signs, kernel, stride, padding)
    bits = _pack_bool(cols > 0)
    valid = None if not padding else _pack_bool(cols != 0)
    dots = xnor_popcount_matmul(bits, weight_bits.words, c * kernel, valid)
    return dots.reshape(n, lout, -1).transpose(0, 2, 1)


class Layer:
    """Base class. ``params``/``grads`` map parameter names to arrays."""

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def forward_packed(self, x):
        return self.forward(x, train=False)

    def _take_cache(self):
        if self._cache is None:
            raise StateError(f"{type(self).__name__}.backward called without a training forward pass")
        cache, self._cache = self._cache, None
        return cache

    def zero_grads(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)


class _WeightBinarizer:
    """Mixin for layers whose weights may be binarized."""

    binary = False
    ste = SteKind.TANH
    smooth = False

    def _weight_threshold(self):
        alpha = self.params.get("alpha")
        if alpha is None:
            return 0.0
        return alpha.reshape(alpha.shape + (1,) * (self.params["weight"].ndim - 1))

    def effective_weight(self):
        w = self.params["weight"]
        if not self.binary:
            return w
        shifted = w - self._weight_threshold()
        if self.smooth:
            return surrogate(shifted, self.ste).astype(w.dtype)
        return sign_binarize(shifted).astype(w.dtype)

    def weight_bits(self):
        if self.smooth:
            raise StateError("packed weights are undefined in smooth mode")
        wb = self.effective_weight()
        return PackedBitTensor.from_signs(wb.reshape(wb.shape[0], -1).astype(np.int8))

    def _shadow_grads(self, grad_wb):
        """Route the gradient w.r.t. the binarized view back to shadow values."""
        if not self.binary:
            self.grads["weight"] = grad_wb
            return
        shifted = self.params["weight"] - self._weight_threshold()
        g = grad_wb * ste_gradient(shifted, self.ste)
        self.grads["weight"] = g.astype(grad_wb.dtype)
        if "alpha" in self.params:
            self.grads["alpha"] = -g.reshape(g.shape[0], -1).sum(axis=1)


class Conv1d(_WeightBinarizer, Layer):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, *, binary=False,
                 ste=SteKind.TANH, binary_input=False, rng=None, dtype=np.float32):
        super().__init__()
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        self.stride, self.padding = stride, padding
        self.binary, self.ste = binary, ste
        # bipolar input lets inference use the XNOR/popcount kernel
        self.binary_input = binary_input
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = np.sqrt(1.0 / (in_ch * kernel))
        self.params["weight"] = rng.uniform(-bound, bound, (out_ch, in_ch, kernel)).astype(dtype)

    def forward(self, x, train=False, rng=None):
        wb = self.effective_weight()
        out, cols = conv1d(x, wb, self.stride, self.padding)
        if train:
            self._cache = (cols, wb, x.shape)
        return out

    def backward(self, grad):
        cols, wb, in_shape = self._take_cache()
        grad_x, grad_wb = conv1d_grads(grad, cols, wb, in_shape, self.stride, self.padding)
        self._shadow_grads(grad_wb)
        return grad_x

    def forward_packed(self, x):
        if not (self.binary and self.binary_input):
            return self.forward(x)
        if x.ndim != 3 or x.shape[1] != self.in_ch:
            raise InvalidArgumentError(f"expected (batch, {self.in_ch}, length) input")
        out = conv1d_packed(x, self.weight_bits(), self.kernel, self.stride, self.padding)
        return out.astype(self.params["weight"].dtype)


class Dense(_WeightBinarizer, Layer):
    """Bias-free fully connected layer: ``(N, in) -> (N, out)``.

    With ``weight_alpha`` the binarized weights use one learnable threshold per
    output row, ``Sign(w - alpha)``.
    """

    def __init__(self, in_features, out_features, *, binary=False, ste=SteKind.TANH,
                 weight_alpha=None, rng=None, dtype=np.float32):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        self.binary, self.ste = binary, ste
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = np.sqrt(1.0 / in_features)
        self.params["weight"] = rng.uniform(-bound, bound, (out_features, in_features)).astype(dtype)
        if weight_alpha is not None and weight_alpha.learnable:
            self.params["alpha"] = np.full(out_features, weight_alpha.initial, dtype=dtype)

    def _check(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise InvalidArgumentError(
                f"dense layer expects (batch, {self.in_features}), got {x.shape}"
            )

    def forward(self, x, train=False, rng=None):
        self._check(x)
        wb = self.effective_weight()
        if train:
            self._cache = (x, wb)
        return x @ wb.T

    def backward(self, grad):
        x, wb = self._take_cache()
        self._shadow_grads(grad.T @ x)
        return grad @ wb

    def forward_packed(self, x):
        if not self.binary:
            return self.forward(x)
        self._check(x)
        if not np.all(np.abs(x) == 1):
            raise InvalidArgumentError("packed dense path needs bipolar input")
        bits = _pack_bool(x > 0)
        out = xnor_popcount_matmul(bits, self.weight_bits().words, self.in_features)
        return out.astype(self.params["weight"].dtype)


class SignActivation(Layer):
    """Sign(x - alpha) per channel, with the STE in the backward pass."""

    def __init__(self, channels, ste=SteKind.POLY, threshold=FIXED_ZERO, dtype=np.float32):
        super().__init__()
        self.channels, self.ste, self.threshold = channels, ste, threshold
        self.smooth = False
        self._fixed_alpha = np.full(channels, threshold.initial, dtype=dtype)
        if threshold.learnable:
            self.params["alpha"] = self._fixed_alpha.copy()

    @property
    def alpha(self):
        return self.params.get("alpha", self._fixed_alpha)

    def forward(self, x, train=False, rng=None):
        if x.shape[1] != self.channels:
            raise InvalidArgumentError(f"expected {self.channels} channels, got {x.shape[1]}")
        shifted = x - self.alpha[:, None]
        if train:
            self._cache = shifted
        if self.smooth:
            return surrogate(shifted, self.ste).astype(x.dtype)
        return sign_binarize(shifted).astype(x.dtype)

    def backward(self, grad):
        shifted = self._take_cache()
        g = (grad * ste_gradient(shifted, self.ste)).astype(grad.dtype)
        if "alpha" in self.params:
            self.grads["alpha"] = -g.sum(axis=(0, 2))
        return g


class BatchNorm1d(Layer):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.channels, self.eps, self.momentum = channels, eps, momentum
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[1] != self.channels:
            raise InvalidArgumentError(f"batchnorm expects {self.channels} channels, got {x.shape}")
        gamma = self.params["gamma"][:, None]
        beta = self.params["beta"][:, None]
        if not train:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            return (x - self.running_mean[:, None]) * inv[:, None].astype(x.dtype) * gamma + beta
        if x.shape[0] == 0:
            raise InvalidArgumentError("batchnorm cannot train on an empty batch")
        m = x.shape[0] * x.shape[2]
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        inv = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = (x - mean[:, None]) * inv[:, None]
        unbiased = var * (m / (m - 1)) if m > 1 else var
        mom = self.momentum
        self.running_mean = ((1 - mom) * self.running_mean + mom * mean).astype(self.running_mean.dtype)
        self.running_var = ((1 - mom) * self.running_var + mom * unbiased).astype(self.running_var.dtype)
        self._cache = (xhat, inv)
        return xhat * gamma + beta

    def backward(self, grad):
        xhat, inv = self._take_cache()
        self.grads["gamma"] = (grad * xhat).sum(axis=(0, 2))
        self.grads["beta"] = grad.sum(axis=(0, 2))
        gxhat = grad * self.params["gamma"][:, None]
        mean_g = gxhat.mean(axis=(0, 2), keepdims=True)
        mean_gx = (gxhat * xhat).mean(axis=(0, 2), keepdims=True)
        return (gxhat - mean_g - xhat * mean_gx) * inv[:, None]


class MaxPool1d(Layer):
    """Windowed maximum; ties route the gradient to the first index."""

    def __init__(self, kernel, stride):
        super().__init__()
        self.kernel, self.stride = kernel, stride

    def forward(self, x, train=False, rng=None):
        if pool_out_length(x.shape[-1], self.kernel, self.stride) < 1:
            raise ShapeError(f"pool window {self.kernel} larger than input length {x.shape[-1]}")
        win = sliding_window_view(x, self.kernel, axis=-1)[..., :: self.stride, :]
        idx = win.argmax(axis=-1)
        out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        if train:
            self._cache = (idx, x.shape)
        return out

    def backward(self, grad):
        idx, shape = self._take_cache()
        grad_x = np.zeros(shape, dtype=grad.dtype)
        lout = grad.shape[-1]
        span = self.stride * (lout - 1) + 1
        for j in range(self.kernel):
            grad_x[..., j : j + span : self.stride] += np.where(idx == j, grad, 0)
        return grad_x


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        if train:
            self._cache = x > 0
        return np.maximum(x, 0)

    def backward(self, grad):
        return grad * self._take_cache()


class Dropout(Layer):
    """Inverted dropout; identity outside training."""

    def __init__(self, rate=0.5):
        super().__init__()
        if not 0 <= rate < 1:
            raise InvalidArgumentError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            if train:
                self._cache = None
            return x
        if rng is None:
            raise InvalidArgumentError("dropout in training mode needs an rng")
        keep = (rng.random(x.shape) >= self.rate).astype(x.dtype) / x.dtype.type(1 - self.rate)
        self._cache = keep
        return x * keep

    def backward(self, grad):
        keep, self._cache = self._cache, None
        return grad if keep is None else grad * keep


class Flatten(Layer):
    def forward(self, x, train=False, rng=None):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


def relu(x):
    return np.maximum(np.asarray(x), 0)


def dropout(x, rate, train, rng=None):
    return Dropout(rate).forward(np.asarray(x), train=train, rng=rng)


def maxpool1d(x, kernel, stride):
    x = np.asarray(x)
    return MaxPool1d(kernel, stride).forward(x)
