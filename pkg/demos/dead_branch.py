"""When does the collision branch actually switch on?

With the default init (w' = 1, b1 = 0) the branch argument is
(w - 1).x, which is negative whenever x >= 0 and |w| < 1. On raw pixel or
raw YEAST features the branch is then off for every example and an IC
network computes exactly what its MP twin computes. Standardizing the
inputs brings negative coordinates and a live branch.

    python3 demos/dead_branch.py
"""
import os

import numpy as np

from icnet.cli import branch_activity
from icnet.data import load_mnist_idx, load_uci_csv
from icnet.layers import LayerSpec, build_network, mp_twin

DATA = os.path.join(os.path.dirname(__file__), "..", "data")
yeast_raw = load_uci_csv("yeast", os.path.join(DATA, "yeast"), standardized=False)
yeast_std = load_uci_csv("yeast", os.path.join(DATA, "yeast"))
mnist = load_mnist_idx(os.path.join(DATA, "mnist"), subset=1000, flatten=True)

for label, ds in (("yeast raw", yeast_raw), ("yeast standardized", yeast_std),
                  ("mnist pixels", mnist)):
    for wp in (1.0, 0.0):
        n = ds.x_train.shape[1]
        net = build_network((n,), [LayerSpec("dense", 32), LayerSpec("dense", 16)], ds.n_classes,
                            np.random.default_rng(0), w_prime_init=wp)
        x = ds.x_test[:500]
        same = np.array_equal(net.logits(x), mp_twin(net).logits(x))
        print(f"{label:>20}  w'={wp:.0f}  branch on {100 * branch_activity(net, x):6.2f}%  "
              f"identical to MP twin: {same}")
