import json

import numpy as np
import pytest

from bnn_ecg.accounting import (
    DEFAULT_CONVENTION,
    PUBLISHED_RESOURCES,
    compare,
    count_ops,
    count_params,
    format_table,
    report,
    runtime_memory_estimate,
    speedup_estimate,
    speedup_from_counts,
    storage_bytes,
)
from bnn_ecg.errors import InvalidArgumentError
from bnn_ecg.layers import BatchNorm1d, Conv1d, Dense
from bnn_ecg.models import NetworkSpec, baseline_spec, binarized_spec, build

BASE = baseline_spec()
BTPN = binarized_spec("btpn")


def instrumented_census(name):
    """Run a real forward pass and count arithmetic from the tensors it produces."""
    net = build(name, seed=0)
    x = np.zeros((1, 1, 3600), dtype=np.float32)
    flops = bops = 0
    first = True
    for layer in net.layers:
        out = layer.forward(x)
        if isinstance(layer, Conv1d):
            macs = out.size * layer.in_ch * layer.kernel
            if not layer.binary:
                flops += 2 * macs
            elif first:
                flops += macs
            else:
                bops += 2 * macs
            first = False
        elif isinstance(layer, Dense):
            macs = out.size * layer.in_features
            if layer.binary:
                bops += 2 * macs
            else:
                flops += 2 * macs
        elif isinstance(layer, BatchNorm1d):
            flops += 2 * out.size
        x = out
    return flops, bops


def test_layer_table_counts():
    weights = [r["weight_params"] for r in count_params(BASE) if r["kind"] in ("conv", "dense")]
    assert weights == [128, 1152, 3456, 14336, 20480, 12288, 13824, 1080]
    assert weights[3] == 14_336 and weights[-1] == 1_080
    assert sum(r["bn_params"] for r in count_params(BASE)) == 632
    assert sum(weights) == 66_744


def test_storage():
    assert storage_bytes(BASE) == 269_504
    assert storage_bytes(BASE) / 1024 == 263.1875
    assert storage_bytes(BTPN) == 10_871
    assert round(storage_bytes(BTPN) / 1024, 2) == 10.62
    alpha = binarized_spec("btpn-alpha")
    assert storage_bytes(alpha) - storage_bytes(BTPN) == 4 * (8 + 12 + 32 + 64 + 64 + 64 + 72 + 5)
    assert storage_bytes(BTPN, padded=True) > storage_bytes(BTPN)


def test_baseline_ops():
    assert report(BASE).totals["macs"] == 2_422_456
    flops, bops = count_ops(BASE)
    assert bops == 0
    assert abs(flops - 4.875e6) / 4.875e6 <= 0.03


def test_btpn_ops():
    flops, bops = count_ops(BTPN)
    assert bops == 4_384_112
    assert flops == 249_896
    assert abs(bops - 4.471e6) / 4.471e6 <= 0.03
    assert abs(flops - 2.458e5) / 2.458e5 <= 0.05


@pytest.mark.parametrize("name", ["baseline", "btpn", "btpn-alpha"])
def test_ops_match_instrumented_forward(name):
    from bnn_ecg.models import spec_for

    assert count_ops(spec_for(name)) == instrumented_census(name)


def test_full_precision_mode_on_binarized_spec():
    # BN sits after pooling in the binarized layout, so it touches fewer elements
    assert count_ops(BTPN, mode="full_precision") == (2 * 2_422_456 + 2 * 9_748, 0)
    with pytest.raises(InvalidArgumentError):
        count_ops(BTPN, mode="half")


def test_speedup_published_inputs():
    s = speedup_from_counts(4.875e6, 2.458e5, 4.471e6, 32)
    assert abs(s - 12.64) <= 0.05


def test_speedup_identity_and_monotonic():
    assert speedup_from_counts(1e6, 1e6, 0) == 1.0
    assert speedup_from_counts(1e6, 1e5, 1e6, 64) > speedup_from_counts(1e6, 1e5, 1e6, 32)
    with pytest.raises(InvalidArgumentError):
        speedup_from_counts(1e6, 0, 0)


def test_speedup_own_counts():
    base, binr = compare(BASE, BTPN)
    assert 12.0 <= binr.speedup_estimate <= 13.3
    assert binr.speedup_estimate == speedup_estimate(base, binr)


def test_runtime_memory():
    base = runtime_memory_estimate(BASE)
    binr = runtime_memory_estimate(BTPN)
    assert abs(base / 1024 - 421) < 1
    assert 3.0 <= base / binr <= 4.5


def test_runtime_memory_zero_layers():
    empty = NetworkSpec((), input_length=3600)
    assert runtime_memory_estimate(empty) == 3600 * 4


def test_report_totals_are_sums():
    r = report(BTPN)
    for key in ("flops", "bops", "weight_params", "bn_params"):
        assert r.totals[key] == sum(getattr(l, key) for l in r.layers)
    d = json.loads(r.to_json())
    assert d["conventions"]["word_size"] == 32 and d["storage_bytes"] == 10871


def test_table_text_lists_conventions():
    text = format_table(*compare(BASE, BTPN))
    assert text.startswith("conventions: flops_per_mac=2")
    assert "12.65x" in text and "(published)" in text
