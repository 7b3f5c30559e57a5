"""WeightFileV1: the on-disk model format.

Little-endian throughout. Header::

    4s  magic b"BECG"
    u8  format version (1)
    u8  model kind (0 baseline, 1 BTTN, 2 BTPN, 3 BPPN, 4 BPTN, 5 BTPN-alpha)
    u16 record count

Each record starts with a kind byte and a fixed-size shape header, so the
payload length (and the whole file length) follows from headers alone:

    1 conv float32   u16 out, in, kernel, stride, padding; out*in*kernel f32
    2 conv bits      same header; out rows of ceil(in*kernel/64) u64 words
    3 batchnorm      u16 channels, f32 eps, f32 momentum; 4*channels f32
                     (gamma, beta, running mean, running variance)
    4 dense float32  u16 out, in; out*in f32
    5 dense bits     u16 out, in; out rows of ceil(in/64) u64 words
    6 thresholds     u16 count; count f32

Binarized models store only the sign of each shadow weight; the loaded
network's shadow weights are the stored signs (shifted by the row
threshold where one exists), which reproduce the same binarized view.
"""

import struct
from pathlib import Path

import numpy as np

from .bits import WORD_DTYPE, PackedBitTensor, n_words
from .errors import FormatError
from .layers import BatchNorm1d, Conv1d, Dense, SignActivation
from .models import MODEL_NAMES, build

MAGIC = b"BECG"
VERSION = 1
MODEL_KINDS = {name: i for i, name in enumerate(MODEL_NAMES)}

CONV_F32, CONV_BITS, BATCHNORM, DENSE_F32, DENSE_BITS, THRESHOLDS = range(1, 7)

_HEADER = struct.Struct("<4sBBH")
_CONV = struct.Struct("<5H")
_BN = struct.Struct("<Hff")
_DENSE = struct.Struct("<2H")
_COUNT = struct.Struct("<H")


def _f32(a):
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def _bits(wb):
    return PackedBitTensor.from_signs(wb.reshape(wb.shape[0], -1).astype(np.int8)).words.astype("<u8").tobytes()


def _records(net):
    for layer in net.layers:
        if isinstance(layer, Conv1d):
            head = _CONV.pack(layer.out_ch, layer.in_ch, layer.kernel, layer.stride, layer.padding)
            if layer.binary:
                yield bytes([CONV_BITS]) + head + _bits(layer.effective_weight())
            else:
                yield bytes([CONV_F32]) + head + _f32(layer.params["weight"])
        elif isinstance(layer, BatchNorm1d):
            stats = np.concatenate([layer.params["gamma"], layer.params["beta"],
                                    layer.running_mean, layer.running_var])
            yield bytes([BATCHNORM]) + _BN.pack(layer.channels, layer.eps, layer.momentum) + _f32(stats)
        elif isinstance(layer, Dense):
            head = _DENSE.pack(layer.out_features, layer.in_features)
            if layer.binary:
                yield bytes([DENSE_BITS]) + head + _bits(layer.effective_weight())
            else:
                yield bytes([DENSE_F32]) + head + _f32(layer.params["weight"])
        if "alpha" in layer.params:
            alpha = layer.params["alpha"]
            yield bytes([THRESHOLDS]) + _COUNT.pack(alpha.size) + _f32(alpha)


def dumps(net):
    records = list(_records(net))
    return _HEADER.pack(MAGIC, VERSION, MODEL_KINDS[net.name], len(records)) + b"".join(records)


def save(net, path):
    Path(path).write_bytes(dumps(net))


class _Reader:
    def __init__(self, data):
        self.data, self.pos = data, 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st, what):
        return st.unpack(self.take(st.size, what))

    def f32(self, count, what):
        return np.frombuffer(self.take(4 * count, what), dtype="<f4").astype(np.float32)

    def words(self, rows, nbits, what):
        count = rows * n_words(nbits)
        return np.frombuffer(self.take(8 * count, what), dtype=WORD_DTYPE).reshape(rows, -1)


def _expect(reader, kinds, what):
    at = reader.pos
    kind = reader.take(1, "record kind")[0]
    if kind not in kinds:
        raise FormatError(f"expected {what} record, found kind {kind}", at)
    return kind, at


def _signs(words, nbits, at):
    try:
        return PackedBitTensor(words.shape[0], nbits, words).to_signs().astype(np.float32)
    except ValueError:
        raise FormatError("nonzero padding bits in packed weights", at) from None


def loads(data, dtype=np.float32):
    r = _Reader(data)
    magic, version, kind, count = r.unpack(_HEADER, "header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported weight-file version {version}", 4)
    if kind >= len(MODEL_NAMES):
        raise FormatError(f"unknown model kind {kind}", 5)
    net = build(MODEL_NAMES[kind], dtype=dtype)
    seen = 0
    for layer in net.layers:
        if isinstance(layer, Conv1d):
            rk, at = _expect(r, (CONV_BITS,) if layer.binary else (CONV_F32,), "conv")
            shape = r.unpack(_CONV, "conv header")
            if shape != (layer.out_ch, layer.in_ch, layer.kernel, layer.stride, layer.padding):
                raise FormatError(f"conv shape {shape} does not match the {net.name} architecture", at)
            n = layer.in_ch * layer.kernel
            if layer.binary:
                w = _signs(r.words(layer.out_ch, n, "conv bits"), n, at)
            else:
                w = r.f32(layer.out_ch * n, "conv weights")
            layer.params["weight"] = w.reshape(layer.params["weight"].shape).astype(dtype)
            seen += 1
        elif isinstance(layer, BatchNorm1d):
            _, at = _expect(r, (BATCHNORM,), "batchnorm")
            channels, eps, momentum = r.unpack(_BN, "batchnorm header")
            if channels != layer.channels:
                raise FormatError(f"batchnorm has {channels} channels, expected {layer.channels}", at)
            stats = r.f32(4 * channels, "batchnorm parameters").reshape(4, channels).astype(dtype)
            layer.params["gamma"], layer.params["beta"] = stats[0].copy(), stats[1].copy()
            layer.running_mean, layer.running_var = stats[2].copy(), stats[3].copy()
            layer.eps, layer.momentum = float(eps), float(momentum)
            seen += 1
        elif isinstance(layer, Dense):
            _, at = _expect(r, (DENSE_BITS,) if layer.binary else (DENSE_F32,), "dense")
            shape = r.unpack(_DENSE, "dense header")
            if shape != (layer.out_features, layer.in_features):
                raise FormatError(f"dense shape {shape} does not match the architecture", at)
            if layer.binary:
                w = _signs(r.words(layer.out_features, layer.in_features, "dense bits"), layer.in_features, at)
            else:
                w = r.f32(layer.out_features * layer.in_features, "dense weights")
            layer.params["weight"] = w.reshape(shape).astype(dtype)
            seen += 1
        if "alpha" in layer.params:
            _, at = _expect(r, (THRESHOLDS,), "threshold")
            (n,) = r.unpack(_COUNT, "threshold header")
            if n != layer.params["alpha"].size:
                raise FormatError(f"{n} thresholds stored, layer needs {layer.params['alpha'].size}", at)
            layer.params["alpha"] = r.f32(n, "thresholds").astype(dtype)
            if isinstance(layer, Dense):
                # keep Sign(w - alpha) equal to the stored bits
                layer.params["weight"] = (layer.params["weight"] + layer.params["alpha"][:, None]).astype(dtype)
            seen += 1
    if seen != count:
        raise FormatError(f"header declares {count} records, architecture has {seen}", 6)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes", r.pos)
    return net


def load(path, dtype=np.float32):
    return loads(Path(path).read_bytes(), dtype)
