"""Loss surfaces around trained float and binarized models.

Both models are perturbed along two random filter-normalized directions.
The float surface is smooth near the minimum. Binarized weights only change
when a shadow weight crosses its threshold, so that surface is flat in
places and jumps sharply elsewhere, which gives larger variance along the
axes.
"""

import numpy as np

from bnn_ecg.data import synthetic_dataset
from bnn_ecg.evaluation import loss_landscape
from bnn_ecg.models import build
from bnn_ecg.training import TrainConfig, train

data = synthetic_dataset(500, 100)
samples = data.arrays("test")
np.set_printoptions(precision=2, suppress=True, linewidth=120)

for name, lr in (("baseline", 1e-3), ("btpn", 1e-2)):
    net, _ = train(build(name, seed=0), data, TrainConfig(epochs=10, initial_lr=lr))
    grid = loss_landscape(net, samples, resolution=9, scale=1.0, seed=0)
    print(name, "axis variance (row, col):", tuple(round(v, 2) for v in grid.axis_variance()))
    print(grid.losses)
