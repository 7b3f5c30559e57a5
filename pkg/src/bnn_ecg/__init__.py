"""Binarized 1-D CNN for five-class ECG arrhythmia classification.

Training and XNOR/popcount inference, straight-through estimators, and
parameter/storage/operation accounting, on numpy.
"""

from .bits import PackedBitTensor, Tensor1D, pack_bits, unpack_bits, xnor_popcount_dot
from .layers import SteKind, ThresholdMode, sign_binarize, ste_gradient
from .models import (
    VARIANTS,
    BinConfig,
    Network,
    NetworkSpec,
    baseline_spec,
    binarized_spec,
    build,
    build_baseline,
    build_binarized,
    infer,
    shape_plan,
)

__version__ = "0.1.0"
