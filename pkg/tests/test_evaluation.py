import json

import numpy as np
import pytest

from bnn_ecg.data import synthetic_dataset
from bnn_ecg.errors import InvalidArgumentError
from bnn_ecg.evaluation import evaluate, loss_landscape, mean_loss, metrics_from_predictions
from bnn_ecg.models import build

N, S, V, F, Q = range(5)


def brute_force_rates(y_true, y_pred, c):
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
    sen = tp / (tp + fn) if tp + fn else None
    ppr = tp / (tp + fp) if tp + fp else None
    return sen, ppr


def test_hand_counted_example():
    m = metrics_from_predictions([V, V, N, N], [V, N, N, N])
    assert m.sen[V] == 0.5 and m.ppr[V] == 1.0 and m.oa == 0.75
    assert m.sen[S] is None and m.ppr[S] is None


def test_perfect_predictor(rng):
    y = rng.integers(0, 5, 40)
    m = metrics_from_predictions(y, y)
    assert m.oa == 1.0
    assert all(v == 1.0 for v in m.sen + m.ppr if v is not None)


def test_against_brute_force(rng):
    for _ in range(50):
        y = rng.integers(0, 5, 30)
        p = rng.integers(0, 5, 30)
        m = metrics_from_predictions(y, p)
        assert m.confusion.sum() == 30
        np.testing.assert_array_equal(m.confusion.sum(axis=1), np.bincount(y, minlength=5))
        assert m.oa == np.trace(m.confusion) / 30
        for c in range(5):
            assert (m.sen[c], m.ppr[c]) == brute_force_rates(y, p, c)


def test_empty():
    with pytest.raises(InvalidArgumentError):
        metrics_from_predictions([], [])


def test_json_and_csv():
    m = metrics_from_predictions([V, V, N, N], [V, N, N, N])
    d = json.loads(m.to_json())
    assert d["sen"]["V"] == 0.5 and d["ppr"]["S"] is None and d["total"] == 4
    lines = m.confusion_csv().splitlines()
    assert lines[0] == "true\\pred,N,S,V,F,Q" and lines[1] == "N,2,0,0,0,0"


def test_evaluate_packed_matches_reference():
    ds = synthetic_dataset(10, 10, seed=2)
    net = build("btpn", seed=2)
    a, b = evaluate(net, ds.test), evaluate(net, ds.test, packed=True)
    np.testing.assert_array_equal(a.confusion, b.confusion)


def test_landscape_center_and_determinism():
    ds = synthetic_dataset(0, 10, seed=2)
    x, y = ds.arrays("test")
    net = build("btpn", seed=0)
    before = [v.copy() for *_, v in net.named_params()]
    g1 = loss_landscape(net, (x, y), resolution=3, scale=0.5, seed=9)
    g2 = loss_landscape(net, (x, y), resolution=3, scale=0.5, seed=9)
    assert g1.center == mean_loss(net, x.astype(np.float32), y)
    np.testing.assert_array_equal(g1.losses, g2.losses)
    for b, (*_, v) in zip(before, net.named_params()):
        np.testing.assert_array_equal(b, v)
    assert g1.to_csv().splitlines()[0] == "i,j,x,y,loss"


def test_landscape_even_resolution():
    with pytest.raises(InvalidArgumentError):
        loss_landscape(build("baseline"), synthetic_dataset(0, 5).test, resolution=4)
