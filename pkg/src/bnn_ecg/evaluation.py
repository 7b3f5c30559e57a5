"""Classification metrics and loss-landscape probing."""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .data import CLASSES, to_arrays
from .errors import InvalidArgumentError
from .layers import Conv1d, Dense
from .training import cross_entropy


@dataclass
class Metrics:
    """Confusion matrix (rows = truth, cols = prediction) and derived rates.

    ``sen``/``ppr`` hold ``None`` where the denominator is zero.
    """

    confusion: np.ndarray
    oa: float
    sen: list
    ppr: list

    def to_dict(self):
        return {
            "classes": list(CLASSES[: len(self.sen)]),
            "confusion": self.confusion.tolist(),
            "total": int(self.confusion.sum()),
            "oa": self.oa,
            "sen": dict(zip(CLASSES, self.sen)),
            "ppr": dict(zip(CLASSES, self.ppr)),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def confusion_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = CLASSES[: self.confusion.shape[0]]
        w.writerow(["true\\pred", *names])
        for name, row in zip(names, self.confusion):
            w.writerow([name, *row.tolist()])
        return buf.getvalue()


def metrics_from_predictions(y_true, y_pred, n_classes=len(CLASSES)):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise InvalidArgumentError("cannot evaluate an empty test set")
    if y_true.shape != y_pred.shape:
        raise InvalidArgumentError("truth and prediction lengths differ")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    tp = np.diag(confusion)
    truth = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    sen = [float(tp[c] / truth[c]) if truth[c] else None for c in range(n_classes)]
    ppr = [float(tp[c] / predicted[c]) if predicted[c] else None for c in range(n_classes)]
    return Metrics(confusion, float(tp.sum() / confusion.sum()), sen, ppr)


def _as_arrays(samples):
    if isinstance(samples, tuple):
        return samples
    return to_arrays(list(samples))


def evaluate(net, test_set, packed=False):
    """Metrics of ``net`` on a segment list or an ``(x, y)`` pair."""
    x, y = _as_arrays(test_set)
    if len(y) == 0:
        raise InvalidArgumentError("cannot evaluate an empty test set")
    return metrics_from_predictions(y, net.predict(x, packed=packed))


def mean_loss(net, x, y, batch_size=256):
    logits = net.logits(x, batch_size=batch_size)
    return cross_entropy(logits, y)[0]


@dataclass
class LandscapeGrid:
    resolution: int
    scale: float
    coords: np.ndarray
    losses: np.ndarray  # losses[i, j] at coords[i] along d1, coords[j] along d2
    seeds: tuple  # entropy tuples of the two direction generators

    @property
    def center(self):
        c = self.resolution // 2
        return self.losses[c, c]

    def axis_variance(self):
        """Loss variance along the two grid axes through the center."""
        c = self.resolution // 2
        return float(np.var(self.losses[c, :])), float(np.var(self.losses[:, c]))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "x", "y", "loss"])
        for i, xi in enumerate(self.coords):
            for j, yj in enumerate(self.coords):
                w.writerow([i, j, repr(float(xi)), repr(float(yj)), repr(float(self.losses[i, j]))])
        return buf.getvalue()


def filter_normalized_direction(net, rng):
    """Random direction with each conv filter / dense row scaled to its weight's norm.

    BN parameters and thresholds get a zero direction.
    """
    direction = {}
    for key, layer, name, value in net.named_params():
        if name == "weight" and isinstance(layer, (Conv1d, Dense)):
            d = rng.standard_normal(value.shape)
            axes = tuple(range(1, value.ndim))
            wn = np.sqrt((value.astype(np.float64) ** 2).sum(axis=axes, keepdims=True))
            dn = np.sqrt((d ** 2).sum(axis=axes, keepdims=True))
            direction[key] = d * wn / np.where(dn == 0, 1, dn)
        else:
            direction[key] = np.zeros(value.shape)
    return direction


def loss_landscape(net, samples, resolution=21, scale=1.0, seed=0):
    """Loss on the plane ``w + x*d1 + y*d2`` for ``x, y`` in ``[-scale, scale]``.

    Binarized models see the perturbed shadow weights through Sign, as in any
    forward pass. The network is restored afterwards.
    """
    if resolution < 1 or resolution % 2 == 0:
        raise InvalidArgumentError("resolution must be a positive odd number")
    x, y = _as_arrays(samples)
    x = np.asarray(x, dtype=net.dtype)
    half = resolution // 2
    coords = scale * (np.arange(resolution) - half) / max(half, 1)
    d1 = filter_normalized_direction(net, np.random.default_rng([seed, 1]))
    d2 = filter_normalized_direction(net, np.random.default_rng([seed, 2]))
    params = {key: (layer, name, value.copy()) for key, layer, name, value in net.named_params()}
    losses = np.empty((resolution, resolution))
    try:
        for i, a in enumerate(coords):
            for j, b in enumerate(coords):
                for key, (layer, name, orig) in params.items():
                    if a == 0 and b == 0:
                        layer.params[name] = orig.copy()
                    else:
                        layer.params[name] = (orig + a * d1[key] + b * d2[key]).astype(orig.dtype)
                losses[i, j] = mean_loss(net, x, y)
    finally:
        for key, (layer, name, orig) in params.items():
            layer.params[name] = orig
    return LandscapeGrid(resolution, scale, coords, losses, ((seed, 1), (seed, 2)))
