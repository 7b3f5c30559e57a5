import math

import numpy as np
import pytest

from bnn_ecg.data import DatasetSplit, synthetic_dataset
from bnn_ecg.errors import InvalidArgumentError, NumericError
from bnn_ecg.layers import Conv1d
from bnn_ecg.models import build
from bnn_ecg.training import (
    Adam,
    TrainConfig,
    TrainHistory,
    cross_entropy,
    tb_lr_schedule,
    train,
    train_epoch,
)


class TestCrossEntropy:
    def test_uniform(self):
        assert cross_entropy(np.zeros(5), 2)[0] == pytest.approx(math.log(5))

    def test_confident(self):
        logits = np.array([0.0, 0, 50, 0, 0])
        assert cross_entropy(logits, 2)[0] < 1e-20

    def test_gradient_fd(self, rng):
        for _ in range(20):
            z = rng.standard_normal(5) * 3
            label = int(rng.integers(5))
            _, g = cross_entropy(z, label)
            h = 1e-6
            fd = np.array([
                (cross_entropy(z + h * e, label)[0] - cross_entropy(z - h * e, label)[0]) / (2 * h)
                for e in np.eye(5)
            ])
            assert np.abs(g - fd).max() <= 1e-6

    def test_label_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            cross_entropy(np.zeros(5), 5)

    def test_stable_for_huge_logits(self):
        loss, g = cross_entropy(np.array([[1e4, -1e4, 0, 0, 0]]), [1])
        assert np.isfinite(loss) and np.all(np.isfinite(g))


def _fresh(name="btpn"):
    net = build(name, seed=0)
    for l in net.layers:
        l.zero_grads()
    return net


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        net = _fresh()
        before = [v.copy() for *_, v in net.named_params()]
        Adam(net).step(0.01)
        for b, (*_, v) in zip(before, net.named_params()):
            np.testing.assert_array_equal(b, v)

    def test_descent_direction(self, rng):
        net = _fresh("baseline")
        grads = {}
        for key, layer, name, v in net.named_params():
            layer.grads[name] = grads[key] = rng.standard_normal(v.shape).astype(v.dtype)
        before = {key: v.copy() for key, _, _, v in net.named_params()}
        Adam(net).step(1e-3)
        for key, _, _, v in net.named_params():
            moved = np.sign(v - before[key])
            assert np.all(moved == -np.sign(grads[key]))

    def test_clip_shadow_weights(self):
        net = _fresh()
        conv = next(l for l in net.layers if isinstance(l, Conv1d))
        conv.params["weight"][:] = 0.999
        conv.grads["weight"] = np.full_like(conv.params["weight"], -10.0)
        Adam(net).step(0.5)
        assert conv.params["weight"].max() == 1.0

    def test_non_finite_gradient(self):
        net = _fresh()
        net.layers[0].grads["weight"][0, 0, 0] = np.nan
        with pytest.raises(NumericError):
            Adam(net).step(0.01)


class TestSchedule:
    cfg = TrainConfig(initial_lr=1e-2, lr_drop_factor=0.1, plateau_patience=5, plateau_min_delta=1e-3, lr_floor=1e-4)

    def test_start(self):
        assert tb_lr_schedule([], self.cfg) == 1e-2

    def test_improving_keeps_rate(self):
        assert tb_lr_schedule([1.0 - 0.05 * i for i in range(15)], self.cfg) == 1e-2

    def test_flat_history_drops_at_patience(self):
        p = self.cfg.plateau_patience
        assert tb_lr_schedule([1.0] * p, self.cfg) == 1e-2
        assert tb_lr_schedule([1.0] * (p + 1), self.cfg) == pytest.approx(1e-3)
        assert tb_lr_schedule([1.0] * (2 * p + 1), self.cfg) == pytest.approx(1e-4)
        assert tb_lr_schedule([1.0] * (10 * p), self.cfg) == pytest.approx(1e-4)

    def test_scripted_plateau_boundaries(self):
        # improve for 4 epochs, then flat: the drop lands exactly patience epochs after the last improvement
        hist = [1.0, 0.5, 0.25, 0.1] + [0.1] * 40
        rates = [tb_lr_schedule(hist[:k], self.cfg) for k in range(len(hist) + 1)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert min(rates) >= self.cfg.lr_floor

    def test_history_object_accepted(self):
        h = TrainHistory(loss=[1.0] * 6)
        assert tb_lr_schedule(h, self.cfg) == pytest.approx(1e-3)


def _small_split(n_train=32, n_test=10, seed=3):
    return synthetic_dataset(n_train, n_test, seed=seed)


def test_train_smoke_loss_decreases():
    net = build("baseline", seed=0)
    _, hist = train(net, _small_split(), TrainConfig(epochs=2, batch_size=8, initial_lr=1e-3))
    assert len(hist) == 2 and hist.loss[1] < hist.loss[0]


def test_train_deterministic():
    ds = _small_split()
    cfg = TrainConfig(epochs=2, batch_size=8, seed=5)
    h1 = train(build("btpn", seed=1), ds, cfg)[1]
    h2 = train(build("btpn", seed=1), ds, cfg)[1]
    assert h1.to_csv() == h2.to_csv()


def test_empty_dataset():
    with pytest.raises(InvalidArgumentError):
        train(build("btpn"), DatasetSplit([], []), TrainConfig(epochs=1))


def test_bad_config():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(initial_lr=1e-5, lr_floor=1e-4).validate()
    with pytest.raises(InvalidArgumentError):
        TrainConfig(lr_drop_factor=1.0).validate()


def test_zero_lr_constant_loss():
    net = build("btpn", seed=0, dropout_rate=0.0)
    x, y = _small_split().arrays("train")
    x = x.astype(net.dtype)
    opt = Adam(net)
    losses = [train_epoch(net, opt, x, y, 0.0, 8, np.random.default_rng(0), shuffle=False) for _ in range(3)]
    assert losses[0] == losses[1] == losses[2]


def test_shadow_is_source_of_truth():
    net = build("btpn", seed=0)
    train(net, _small_split(), TrainConfig(epochs=1, batch_size=8))
    for l in net.layers:
        if isinstance(l, Conv1d):
            w = l.params["weight"]
            assert np.abs(w).max() <= 1.0
            np.testing.assert_array_equal(l.effective_weight(), np.where(w >= 0, 1, -1))


def test_history_csv():
    h = TrainHistory([0.5, 0.25], [0.1, 0.2], [0.01, 0.01])
    lines = h.to_csv().splitlines()
    assert lines[0] == "epoch,loss,accuracy,lr" and lines[2] == "2,0.25,0.2,0.01"
