"""ECG segment ingestion, normalization, and per-class train/test splitting.

Two interchange formats are supported:

* CSV: one segment per row, 3600 numeric fields followed by the AAMI label
  letter (N, S, V, F or Q).
* ecg1: little-endian binary. Header is the magic ``b"ECG1"``, a version
  byte (1) and a uint32 record count; each record is 3600 float32 samples
  followed by one ASCII label byte.
"""

import csv
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgumentError, ParseError

log = logging.getLogger(__name__)

SEGMENT_LENGTH = 3600
SAMPLE_RATE_HZ = 360
CLASSES = ("N", "S", "V", "F", "Q")
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}

ECG1_MAGIC = b"ECG1"
ECG1_VERSION = 1
_ECG1_HEADER = struct.Struct("<4sBI")
_RECORD_BYTES = SEGMENT_LENGTH * 4 + 1

# MIT-BIH selection per-class totals and test counts. The printed V ratio (0.21) rounds
# 1,890 to 397, not 402, so ratios are kept as exact fractions.
MITBIH_TOTALS = {"F": 100, "N": 5186, "Q": 19, "S": 545, "V": 1890}
MITBIH_TEST = {"F": 15, "N": 1037, "Q": 4, "S": 90, "V": 402}
MITBIH_TEST_RATIOS = {c: MITBIH_TEST[c] / MITBIH_TOTALS[c] for c in MITBIH_TOTALS}


@dataclass(frozen=True, eq=False)
class EcgSegment:
    samples: np.ndarray
    label: str

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.shape != (SEGMENT_LENGTH,):
            raise InvalidArgumentError(
                f"a segment holds {SEGMENT_LENGTH} samples, got shape {samples.shape}"
            )
        if self.label not in CLASS_INDEX:
            raise InvalidArgumentError(f"unknown AAMI label {self.label!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def class_id(self):
        return CLASS_INDEX[self.label]

    def __eq__(self, other):
        return (
            isinstance(other, EcgSegment)
            and self.label == other.label
            and np.array_equal(self.samples, other.samples)
        )


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int | None = None
    counts: dict = field(default_factory=dict)

    def arrays(self, which):
        segs = self.train if which == "train" else self.test
        return to_arrays(segs)


def to_arrays(segments):
    """Stack segments into ``(N, 1, 3600)`` samples and ``(N,)`` class ids."""
    if not segments:
        return np.zeros((0, 1, SEGMENT_LENGTH)), np.zeros(0, dtype=np.int64)
    x = np.stack([s.samples for s in segments])[:, None, :]
    y = np.array([s.class_id for s in segments], dtype=np.int64)
    return x, y


def resolve_path(path):
    """Relative paths that do not exist are looked up under ``$ECG_DATA_DIR``."""
    path = Path(path)
    if not path.exists() and not path.is_absolute() and os.environ.get("ECG_DATA_DIR"):
        candidate = Path(os.environ["ECG_DATA_DIR"]) / path
        if candidate.exists():
            return candidate
    return path


def load_segments(path, format=None):
    path = resolve_path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "ecg1"
    if format == "csv":
        return read_csv(path)
    if format == "ecg1":
        return read_ecg1(path)
    raise InvalidArgumentError(f"unknown segment format {format!r}")


def read_csv(path):
    segments = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != SEGMENT_LENGTH + 1:
                raise ParseError(
                    f"row has {len(row) - 1} samples, expected {SEGMENT_LENGTH}", f"line {lineno}"
                )
            label = row[-1].strip()
            if label not in CLASS_INDEX:
                raise ParseError(f"unknown label {label!r}", f"line {lineno}")
            try:
                samples = np.array(row[:-1], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"non-numeric sample: {exc}", f"line {lineno}") from None
            if not np.all(np.isfinite(samples)):
                raise ParseError("non-finite sample", f"line {lineno}")
            segments.append(EcgSegment(samples, label))
    return segments


def write_csv(path, segments):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for s in segments:
            writer.writerow([repr(float(v)) for v in s.samples] + [s.label])


def write_ecg1(path, segments):
    with open(path, "wb") as fh:
        fh.write(_ECG1_HEADER.pack(ECG1_MAGIC, ECG1_VERSION, len(segments)))
        for s in segments:
            fh.write(s.samples.astype("<f4").tobytes())
            fh.write(s.label.encode("ascii"))


def read_ecg1(path):
    data = Path(path).read_bytes()
    if len(data) < _ECG1_HEADER.size:
        raise FormatError("file shorter than the ecg1 header", 0)
    magic, version, count = _ECG1_HEADER.unpack_from(data)
    if magic != ECG1_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != ECG1_VERSION:
        raise FormatError(f"unsupported ecg1 version {version}", 4)
    expected = _ECG1_HEADER.size + count * _RECORD_BYTES
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes for {count} records, found {len(data)}", len(data))
    segments = []
    for i in range(count):
        off = _ECG1_HEADER.size + i * _RECORD_BYTES
        samples = np.frombuffer(data, dtype="<f4", count=SEGMENT_LENGTH, offset=off)
        label = chr(data[off + SEGMENT_LENGTH * 4])
        if label not in CLASS_INDEX:
            raise FormatError(f"unknown label byte {label!r}", off + SEGMENT_LENGTH * 4)
        segments.append(EcgSegment(samples.astype(np.float64), label))
    return segments


def normalize(segment):
    """Per-segment z-score. Constant signals map to zeros with a warning."""
    x = segment.samples
    if np.ptp(x) == 0:
        log.warning("constant segment cannot be z-scored; returning zeros")
        return EcgSegment(np.zeros_like(x), segment.label)
    return EcgSegment((x - x.mean()) / x.std(), segment.label)


def stratified_split(segments, test_ratio_per_class, seed=0):
    """Shuffle each class with ``seed`` and hold out ``round(n * ratio)`` for test.

    ``test_ratio_per_class`` is a float (same ratio everywhere) or a mapping
    from label to ratio. Every label present in the mapping must have data.
    """
    by_class = {c: [] for c in CLASSES}
    for s in segments:
        by_class[s.label].append(s)
    if isinstance(test_ratio_per_class, dict):
        ratios = dict(test_ratio_per_class)
    else:
        ratios = {c: float(test_ratio_per_class) for c in CLASSES if by_class[c]}
    rng = np.random.default_rng(seed)
    train, test, counts = [], [], {}
    for c in CLASSES:
        if c not in ratios:
            if by_class[c]:
                raise InvalidArgumentError(f"no test ratio given for class {c}")
            continue
        r = ratios[c]
        if not 0 < r < 1:
            raise InvalidArgumentError(f"test ratio for class {c} must lie in (0, 1), got {r}")
        members = by_class[c]
        if not members:
            raise InvalidArgumentError(f"class {c} has no segments")
        order = rng.permutation(len(members))
        n_test = int(np.floor(len(members) * r + 0.5))
        test += [members[i] for i in order[:n_test]]
        train += [members[i] for i in order[n_test:]]
        counts[c] = {"all": len(members), "train": len(members) - n_test, "test": n_test}
    return DatasetSplit(train, test, seed, counts)


# Pulse-train templates for the synthetic benchmark: (period in samples, pulse width sigma).
SYNTHETIC_TEMPLATES = {
    "N": (300, 8.0),
    "S": (190, 8.0),
    "V": (300, 28.0),
    "F": (190, 28.0),
    "Q": (420, 16.0),
}
SYNTHETIC_SEED = 20240607


def synthetic_segment(label, rng, noise=0.25):
    period, width = SYNTHETIC_TEMPLATES[label]
    t = np.arange(SEGMENT_LENGTH, dtype=np.float64)
    period = period * rng.uniform(0.9, 1.1)
    width = width * rng.uniform(0.85, 1.15)
    x = np.zeros(SEGMENT_LENGTH)
    center = rng.uniform(0, period)
    while center < SEGMENT_LENGTH + 4 * width:
        amp = rng.uniform(0.8, 1.2)
        x += amp * np.exp(-0.5 * ((t - center) / width) ** 2)
        center += period * rng.uniform(0.95, 1.05)
    wander = 0.3 * np.sin(2 * np.pi * t / SEGMENT_LENGTH * rng.uniform(0.2, 1.0) + rng.uniform(0, 2 * np.pi))
    x += wander + noise * rng.standard_normal(SEGMENT_LENGTH)
    return normalize(EcgSegment(x, label))


def synthetic_dataset(n_train=500, n_test=100, seed=SYNTHETIC_SEED, noise=0.25):
    """Balanced five-class pulse-train dataset, already normalized."""
    rng = np.random.default_rng(seed)

    def make(n):
        labels = [CLASSES[i % len(CLASSES)] for i in range(n)]
        return [synthetic_segment(c, rng, noise) for c in labels]

    train, test = make(n_train), make(n_test)
    counts = {c: {"train": sum(s.label == c for s in train), "test": sum(s.label == c for s in test)}
              for c in CLASSES}
    return DatasetSplit(train, test, seed, counts)
