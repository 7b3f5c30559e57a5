"""Train the float baseline and a binarized variant on synthetic beats.

The synthetic set mimics five beat classes with differing rhythm and QRS
width. A handful of epochs is enough to separate them; pass a larger number
on the command line to train longer.
"""

import sys

from bnn_ecg.data import synthetic_dataset
from bnn_ecg.evaluation import evaluate
from bnn_ecg.models import build
from bnn_ecg.training import TrainConfig, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 8
data = synthetic_dataset(500, 100)

for name, lr in (("baseline", 1e-3), ("btpn", 1e-2)):
    cfg = TrainConfig(epochs=epochs, initial_lr=lr, seed=0)
    net, history = train(build(name, seed=0), data, cfg)
    # The binarized model is evaluated with the bit-packed kernels.
    m = evaluate(net, data.test, packed=name != "baseline")
    print(f"{name:9s} final loss {history.loss[-1]:.4f}  lr {history.lr[-1]:.0e}  OA {m.oa:.3f}")
    print("  SEN", [None if s is None else round(s, 3) for s in m.sen])
