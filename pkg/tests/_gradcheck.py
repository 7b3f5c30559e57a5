"""Central finite differences against a network's analytic backward pass."""

import numpy as np

from bnn_ecg.training import cross_entropy


def numeric_grad(f, arr, eps=1e-6):
    grad = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + eps
        up = f()
        arr[i] = old - eps
        down = f()
        arr[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def check_network(net, x, y):
    """Largest relative error over every parameter tensor and the input."""

    def loss():
        return cross_entropy(net.forward(x, train=True), y)[0]

    logits = net.forward(x, train=True)
    _, g = cross_entropy(logits, y)
    grad_x = net.backward(g)
    errors = {"input": rel_error(grad_x, numeric_grad(loss, x))}
    for key, layer, name, value in net.named_params():
        errors[f"{type(layer).__name__}{key}"] = rel_error(layer.grads[name], numeric_grad(loss, value))
    return errors
