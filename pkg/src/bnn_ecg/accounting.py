"""Parameter, storage, operation and runtime-memory accounting.

All counts are derived from a :class:`~bnn_ecg.models.NetworkSpec` and its
shape plan; nothing here needs trained weights. Counting rules live in
:class:`OpCountConvention` and are printed with every report.
"""

import json
from dataclasses import asdict, dataclass, field

from .bits import WORD_BITS, n_words
from .errors import InvalidArgumentError
from .models import activation_shapes

# Published reference figures.
PUBLISHED_RESOURCES = {
    "baseline": {"storage_kb": 263.12, "runtime_kb": 444.93, "flops": 4.875e6, "bops": 0.0},
    "btpn": {"storage_kb": 10.62, "runtime_kb": 117.70, "flops": 2.458e5, "bops": 4.471e6},
    "speedup": 12.65,
    "storage_saving": 24.8,
    "runtime_saving": 3.78,
}


@dataclass(frozen=True)
class OpCountConvention:
    flops_per_mac: int = 2
    binary_weight_real_input_cost: int = 1  # per accumulation
    bn_cost_per_element: int = 2
    pool_cost: int = 0
    float_bytes: int = 4
    word_size: int = 32  # bit-ops per 32-bit FLOP in the speedup model


DEFAULT_CONVENTION = OpCountConvention()


@dataclass
class LayerCount:
    index: int
    kind: str
    label: int | None
    out_shape: tuple
    weight_params: int = 0
    bn_params: int = 0
    alpha_params: int = 0
    macs: int = 0
    flops: int = 0
    bops: int = 0
    weight_bits_padded: int = 0


@dataclass
class ResourceReport:
    model: str
    binarized: bool
    input_length: int
    layers: list
    totals: dict
    storage_bytes: float
    storage_bytes_padded: float
    runtime_memory_bytes: int
    conventions: dict = field(default_factory=lambda: asdict(DEFAULT_CONVENTION))
    speedup_estimate: float | None = None

    @property
    def flops(self):
        return self.totals["flops"]

    @property
    def bops(self):
        return self.totals["bops"]

    def to_dict(self):
        d = asdict(self)
        d["storage_kb"] = self.storage_bytes / 1024
        d["runtime_memory_kb"] = self.runtime_memory_bytes / 1024
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _binarized(spec, mode):
    if mode is None:
        return spec.binarized
    if mode not in ("full_precision", "binarized"):
        raise InvalidArgumentError(f"unknown accounting mode {mode!r}")
    return mode == "binarized"


def layer_census(spec, input_length=None, mode=None, convention=DEFAULT_CONVENTION):
    """Per-layer parameter and operation counts for one input segment."""
    binarized = _binarized(spec, mode)
    learnable_alpha = binarized and spec.binarization is not None and spec.binarization.threshold.learnable
    shapes = activation_shapes(spec, input_length)
    rows, seen_conv = [], False
    for i, (l, shape) in enumerate(zip(spec.layers, shapes)):
        row = LayerCount(i, l.kind, l.label, shape)
        elements = shape[0] * shape[1]
        if l.kind in ("conv", "dense"):
            row.weight_params = l.out_ch * l.in_ch * (l.kernel or 1)
            row.macs = row.weight_params * (shape[1] if l.kind == "conv" else 1)
            fan_in = l.in_ch * (l.kernel or 1)
            row.weight_bits_padded = l.out_ch * n_words(fan_in) * WORD_BITS
            if not binarized:
                row.flops = convention.flops_per_mac * row.macs
            elif l.kind == "conv" and not seen_conv:
                row.flops = convention.binary_weight_real_input_cost * row.macs
            else:
                row.bops = convention.flops_per_mac * row.macs
            if l.kind == "dense" and learnable_alpha:
                row.alpha_params = l.out_ch
            seen_conv = seen_conv or l.kind == "conv"
        elif l.kind == "bn":
            row.bn_params = 2 * l.out_ch
            row.flops = convention.bn_cost_per_element * elements
        elif l.kind == "maxpool":
            row.flops = convention.pool_cost * elements
        elif l.kind == "sign" and learnable_alpha:
            row.alpha_params = l.out_ch
        rows.append(row)
    return rows


def count_params(spec):
    """Per-layer ``(weight_params, bn_params)`` for layers that hold parameters."""
    return [
        {"kind": r.kind, "label": r.label, "weight_params": r.weight_params, "bn_params": r.bn_params}
        for r in layer_census(spec)
        if r.weight_params or r.bn_params
    ]


def storage_bytes(spec, mode=None, padded=False):
    """Bytes needed to store the model's parameters.

    Full precision stores every weight and BN affine parameter as float32.
    Binarized models store one bit per weight (raw, or row-padded to whole
    64-bit words with ``padded=True``) plus float32 BN parameters and
    thresholds.
    """
    rows = layer_census(spec, mode=mode)
    fb = DEFAULT_CONVENTION.float_bytes
    weights = sum(r.weight_params for r in rows)
    bn = sum(r.bn_params for r in rows)
    alpha = sum(r.alpha_params for r in rows)
    if not _binarized(spec, mode):
        return fb * (weights + bn)
    bits = sum(r.weight_bits_padded for r in rows) if padded else weights
    weight_bytes = bits // 8 if bits % 8 == 0 else bits / 8
    return weight_bytes + fb * (bn + alpha)


def count_ops(spec, input_length=None, mode=None, convention=DEFAULT_CONVENTION):
    rows = layer_census(spec, input_length, mode, convention)
    return sum(r.flops for r in rows), sum(r.bops for r in rows)


def speedup_from_counts(base_flops, bin_flops, bin_bops, word_size=32):
    denom = bin_flops + bin_bops / word_size
    if denom <= 0:
        raise InvalidArgumentError("binarized operation count is zero")
    return base_flops / denom


def speedup_estimate(base_report, bin_report, word_size=32):
    """Baseline FLOPs over binarized FLOPs plus BOPs/word_size."""
    if base_report.input_length != bin_report.input_length:
        raise InvalidArgumentError("reports were computed for different input lengths")
    return speedup_from_counts(base_report.flops, bin_report.flops, bin_report.bops, word_size)


def runtime_memory_estimate(spec, mode=None, input_length=None):
    """Weight storage plus every activation buffer for one segment.

    Buffers: the input and the outputs of each conv, pool and dense layer
    (BN, ReLU and Sign work in place). Elements are float32, except that in a
    binarized model every buffer after the first block is counted at one bit.
    """
    binarized = _binarized(spec, mode)
    shapes = activation_shapes(spec, input_length)
    fb = DEFAULT_CONVENTION.float_bytes
    length = spec.input_length if input_length is None else input_length
    bits = spec.input_channels * length * fb * 8
    past_first_block = False
    for l, (c, n) in zip(spec.layers, shapes):
        if l.kind == "sign":
            past_first_block = True
        if l.kind not in ("conv", "maxpool", "dense"):
            continue
        one_bit = binarized and past_first_block and l.kind != "dense"
        bits += c * n * (1 if one_bit else fb * 8)
    weights = storage_bytes(spec, "binarized" if binarized else "full_precision")
    return int(-(-(weights * 8 + bits) // 8))


def report(spec, input_length=None, convention=DEFAULT_CONVENTION):
    rows = layer_census(spec, input_length, convention=convention)
    totals = {
        "weight_params": sum(r.weight_params for r in rows),
        "bn_params": sum(r.bn_params for r in rows),
        "alpha_params": sum(r.alpha_params for r in rows),
        "macs": sum(r.macs for r in rows),
        "flops": sum(r.flops for r in rows),
        "bops": sum(r.bops for r in rows),
    }
    totals["params"] = totals["weight_params"] + totals["bn_params"] + totals["alpha_params"]
    return ResourceReport(
        model=spec.name,
        binarized=spec.binarized,
        input_length=spec.input_length if input_length is None else input_length,
        layers=rows,
        totals=totals,
        storage_bytes=storage_bytes(spec),
        storage_bytes_padded=storage_bytes(spec, padded=True),
        runtime_memory_bytes=runtime_memory_estimate(spec, input_length=input_length),
        conventions=asdict(convention),
    )


def compare(base_spec, bin_spec, input_length=None, convention=DEFAULT_CONVENTION):
    """Reports for both models with the speedup filled into the binarized one."""
    base = report(base_spec, input_length, convention)
    binr = report(bin_spec, input_length, convention)
    binr.speedup_estimate = speedup_estimate(base, binr, convention.word_size)
    base.speedup_estimate = 1.0
    return base, binr


def format_table(base, binr):
    """Plain-text comparison next to the published figures."""
    conv = base.conventions
    ref = PUBLISHED_RESOURCES
    lines = [
        "conventions: " + ", ".join(f"{k}={v}" for k, v in conv.items()),
        f"{'':14s}{'Storage':>12s}{'Runtime Mem':>14s}{'FLOPs':>12s}{'BOPs':>12s}",
    ]
    for r, key in ((base, "baseline"), (binr, "btpn")):
        lines.append(
            f"{r.model:14s}{r.storage_bytes / 1024:10.2f}KB{r.runtime_memory_bytes / 1024:12.2f}KB"
            f"{r.flops:12.4g}{r.bops:12.4g}"
        )
        p = ref[key]
        lines.append(
            f"{'  (published)':14s}{p['storage_kb']:10.2f}KB{p['runtime_kb']:12.2f}KB"
            f"{p['flops']:12.4g}{p['bops']:12.4g}"
        )
    lines.append(
        f"{'saving':14s}{base.storage_bytes / binr.storage_bytes:11.2f}x"
        f"{base.runtime_memory_bytes / binr.runtime_memory_bytes:13.2f}x"
        f"{binr.speedup_estimate:11.2f}x speedup"
    )
    lines.append(
        f"{'  (published)':14s}{ref['storage_saving']:11.2f}x{ref['runtime_saving']:13.2f}x"
        f"{ref['speedup']:11.2f}x speedup"
    )
    if abs(base.runtime_memory_bytes / 1024 - ref["baseline"]["runtime_kb"]) > 0.01 * ref["baseline"]["runtime_kb"]:
        lines.append("note: runtime memory uses this package's buffer model; the reference figures' model is undisclosed")
    return "\n".join(lines)
