"""Loss, Adam, the plateau-driven learning-rate schedule, and the training loop."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericError
from .layers import Conv1d, Dense

N_CLASSES = 5


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    initial_lr: float = 1e-2
    lr_drop_factor: float = 0.1
    plateau_patience: int = 5
    plateau_min_delta: float = 1e-3
    lr_floor: float = 1e-4
    ema_factor: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    class_weighting: bool = False
    shuffle: bool = True

    def validate(self):
        if not self.initial_lr > self.lr_floor > 0:
            raise InvalidArgumentError("need initial_lr > lr_floor > 0")
        if not 0 < self.lr_drop_factor < 1:
            raise InvalidArgumentError("lr_drop_factor must lie in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.plateau_patience < 1:
            raise InvalidArgumentError("epochs >= 0, batch_size >= 1 and patience >= 1 required")
        return self


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    lr: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy", "lr"])
        for i, (l, a, r) in enumerate(zip(self.loss, self.accuracy, self.lr), start=1):
            w.writerow([i, repr(float(l)), repr(float(a)), repr(float(r))])
        return buf.getvalue()


def cross_entropy(logits, labels, weights=None):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    Accepts one logit vector with an integer label, or a batch.
    """
    logits = np.asarray(logits)
    single = logits.ndim == 1
    if single:
        logits, labels = logits[None, :], np.asarray([labels])
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise InvalidArgumentError(f"labels must lie in [0, {logits.shape[1]})")
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(len(labels))
    losses = logsum - z[rows, labels]
    probs = np.exp(z - logsum[:, None])
    probs[rows, labels] -= 1.0
    w = np.ones(len(labels)) if weights is None else np.asarray(weights, dtype=np.float64)[labels]
    total = w.sum()
    loss = float((w * losses).sum() / total)
    grad = (probs * (w / total)[:, None]).astype(logits.dtype)
    return loss, (grad[0] if single else grad)


class Adam:
    """Adam with bias correction; binarized conv/dense shadow weights are clipped to [-1, 1]."""

    def __init__(self, net, beta1=0.9, beta2=0.999, eps=1e-8):
        self.net = net
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {key: np.zeros_like(v) for key, _, _, v in net.named_params()}
        self.v = {key: np.zeros_like(v) for key, _, _, v in net.named_params()}

    def step(self, lr):
        grads = {}
        for key, layer, name, _ in self.net.named_params():
            g = layer.grads.get(name)
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in layer {key[0]} ({type(layer).__name__}.{name})")
            grads[key] = g
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for key, layer, name, value in self.net.named_params():
            if key not in grads:
                continue
            g = grads[key]
            m = self.m[key] = b1 * self.m[key] + (1 - b1) * g
            v = self.v[key] = b2 * self.v[key] + (1 - b2) * g * g
            update = lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            value -= update.astype(value.dtype)
            if name == "weight" and isinstance(layer, (Conv1d, Dense)) and layer.binary:
                np.clip(value, -1.0, 1.0, out=value)


def optimizer_step(opt, lr):
    opt.step(lr)
    return opt.net


def tb_lr_schedule(losses, config):
    """Learning rate for the epoch after ``losses``.

    Replays the history: the rate starts at ``initial_lr`` and is multiplied
    by ``lr_drop_factor`` (never below ``lr_floor``) each time the smoothed
    loss has gone ``plateau_patience`` epochs without improving on its best
    value by at least ``plateau_min_delta``.
    """
    if isinstance(losses, TrainHistory):
        losses = losses.loss
    lr = config.initial_lr
    ema = best = None
    stale = 0
    for loss in losses:
        ema = loss if ema is None else config.ema_factor * ema + (1 - config.ema_factor) * loss
        if best is None or best - ema >= config.plateau_min_delta:
            best, stale = ema, 0
            continue
        stale += 1
        if stale >= config.plateau_patience:
            lr = max(lr * config.lr_drop_factor, config.lr_floor)
            best, stale = ema, 0
    return lr


def class_weights(labels, n_classes=N_CLASSES):
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
    present = counts > 0
    w = np.zeros(n_classes)
    w[present] = counts.sum() / (present.sum() * counts[present])
    return w


def train_epoch(net, opt, x, y, lr, batch_size, rng, weights=None, shuffle=True):
    """One pass over ``(x, y)``; returns the sample-weighted mean loss."""
    order = rng.permutation(len(x)) if shuffle else np.arange(len(x))
    total = 0.0
    for start in range(0, len(x), batch_size):
        idx = order[start : start + batch_size]
        logits = net.forward(x[idx], train=True, rng=rng)
        loss, grad = cross_entropy(logits, y[idx], weights)
        net.backward(grad)
        opt.step(lr)
        total += loss * len(idx)
    return total / len(x)


def accuracy(net, x, y):
    if len(x) == 0:
        return float("nan")
    return float((net.predict(x) == y).mean())


def train(net, dataset, config=None, log=None):
    """Train ``net`` in place on ``dataset.train``; test accuracy is logged each epoch."""
    config = (config or TrainConfig()).validate()
    x, y = dataset.arrays("train")
    if len(x) == 0:
        raise InvalidArgumentError("training set is empty")
    xt, yt = dataset.arrays("test")
    x, xt = x.astype(net.dtype), xt.astype(net.dtype)
    rng = np.random.default_rng(config.seed)
    weights = class_weights(y) if config.class_weighting else None
    opt = Adam(net, config.beta1, config.beta2, config.eps)
    history = TrainHistory()
    for epoch in range(config.epochs):
        lr = tb_lr_schedule(history.loss, config)
        loss = train_epoch(net, opt, x, y, lr, config.batch_size, rng, weights, config.shuffle)
        if not np.isfinite(loss):
            raise NumericError(f"training loss became non-finite at epoch {epoch + 1}")
        history.loss.append(loss)
        history.accuracy.append(accuracy(net, xt, yt))
        history.lr.append(lr)
        if log:
            log(f"epoch {epoch + 1:3d}  loss {loss:.4f}  test acc {history.accuracy[-1]:.4f}  lr {lr:g}")
    return net, history
