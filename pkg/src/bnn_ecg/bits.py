"""Bipolar bit-packing and the XNOR/popcount dot product.

Encoding: bit 1 is +1, bit 0 is -1. Bit ``i`` of a row lives in word
``i // 64`` at position ``i % 64``. Padding bits past the logical length are
always zero in anything this module produces.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

WORD_BITS = 64
WORD_DTYPE = np.dtype("<u8")


def n_words(n):
    return -(-int(n) // WORD_BITS)


def popcount(words):
    """Per-element population count of an unsigned integer array."""
    return np.bitwise_count(np.asarray(words))


def _check_bipolar(signs):
    signs = np.asarray(signs)
    if signs.size and not np.all((signs == 1) | (signs == -1)):
        raise InvalidArgumentError("pack_bits expects values in {-1, +1} only")
    return signs


def _pack_bool(bits):
    """Pack a boolean array along its last axis into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[-1]
    width = n_words(n) * WORD_BITS
    if width != n:
        pad = np.zeros(bits.shape[:-1] + (width - n,), dtype=bool)
        bits = np.concatenate([bits, pad], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(WORD_DTYPE)


def pack_bits(signs):
    """Pack a bipolar vector into a row of 64-bit words.

    >>> hex(int(pack_bits([1, 1, -1, -1])[0]))
    '0x3'
    """
    signs = _check_bipolar(signs)
    if signs.ndim != 1:
        raise InvalidArgumentError("pack_bits packs a single row; use PackedBitTensor for 2-D")
    return _pack_bool(signs > 0)


def unpack_bits(words, n):
    """Inverse of :func:`pack_bits` over the first ``n`` bits."""
    words = np.asarray(words, dtype=WORD_DTYPE)
    if n < 0 or n > words.shape[-1] * WORD_BITS:
        raise InvalidArgumentError(
            f"cannot unpack {n} bits from {words.shape[-1]} words"
        )
    raw = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    return raw[..., :n].astype(np.int8) * 2 - 1


def padding_mask(n):
    """Word mask with ones on the first ``n`` logical bits."""
    mask = np.full(n_words(n), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=WORD_DTYPE)
    tail = n % WORD_BITS
    if tail:
        mask[-1] = np.uint64((1 << tail) - 1)
    return mask


def mask_padding(words, n):
    """Zero every bit past position ``n``."""
    return np.asarray(words, dtype=WORD_DTYPE) & padding_mask(n)


def xnor_popcount_dot(a, b, n):
    """Dot product of two packed bipolar rows of ``n`` logical bits.

    Returns ``2 * popcount(XNOR(a, b)) - n``. Padding bits are masked off
    before counting, so stray bits beyond ``n`` never leak into the result.
    """
    a = np.asarray(a, dtype=WORD_DTYPE)
    b = np.asarray(b, dtype=WORD_DTYPE)
    need = n_words(n)
    if a.shape[-1] != need or b.shape[-1] != need:
        raise InvalidArgumentError(
            f"rows of {a.shape[-1]} and {b.shape[-1]} words do not hold exactly {n} bits"
        )
    agree = ~(a ^ b) & padding_mask(n)
    return int(2 * popcount(agree).sum(dtype=np.int64) - n)


def xnor_popcount_matmul(a, b, n, valid=None):
    """All-pairs XNOR/popcount dot products.

    ``a`` is ``(m, w)`` and ``b`` is ``(k, w)`` packed rows; the result is the
    ``(m, k)`` integer matrix of bipolar dot products. ``valid`` optionally
    gives an ``(m, w)`` packed mask of positions that take part (zero-padded
    positions of a convolution); masked-out positions contribute nothing.
    """
    a = np.asarray(a, dtype=WORD_DTYPE)
    b = np.asarray(b, dtype=WORD_DTYPE)
    if valid is None:
        valid = np.broadcast_to(padding_mask(n), a.shape)
        counted = np.full(a.shape[0], n, dtype=np.int64)
    else:
        valid = np.asarray(valid, dtype=WORD_DTYPE) & padding_mask(n)
        counted = popcount(valid).sum(axis=-1, dtype=np.int64)
    agree = ~(a[:, None, :] ^ b[None, :, :]) & valid[:, None, :]
    return 2 * popcount(agree).sum(axis=-1, dtype=np.int64) - counted[:, None]


@dataclass(frozen=True)
class Tensor1D:
    """Dense real ``(channels, length)`` container."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidArgumentError(f"Tensor1D needs a non-empty 2-D array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError("Tensor1D values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def length(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class PackedBitTensor:
    """Bipolar ``(channels, length)`` values, one bit each, rows word-aligned."""

    channels: int
    length: int
    words: np.ndarray

    def __post_init__(self):
        words = np.asarray(self.words, dtype=WORD_DTYPE)
        if words.shape != (self.channels, n_words(self.length)):
            raise InvalidArgumentError(
                f"words shape {words.shape} does not fit {self.channels}x{self.length} bits"
            )
        if self.length % WORD_BITS and np.any(words & ~padding_mask(self.length)):
            raise InvalidArgumentError("padding bits must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_signs(cls, signs):
        signs = _check_bipolar(signs)
        if signs.ndim == 1:
            signs = signs[None, :]
        if signs.ndim != 2:
            raise InvalidArgumentError("expected a 1-D or 2-D bipolar array")
        return cls(signs.shape[0], signs.shape[1], _pack_bool(signs > 0))

    def to_signs(self):
        return unpack_bits(self.words, self.length)

    @property
    def raw_bits(self):
        return self.channels * self.length

    @property
    def padded_bits(self):
        return self.words.size * WORD_BITS
