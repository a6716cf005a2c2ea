"""One IC unit separates XOR; one MP unit cannot.

    python3 demos/xor_single_neuron.py
"""
import numpy as np

from icnet.cli import train_xor
from icnet.ic_core import XOR_CLOSED_FORM, ic_output, ic_preactivation

POINTS = [(0, 0), (0, 1), (1, 0), (1, 1)]

print("hand-set unit, relu output")
for x in POINTS:
    z = ic_preactivation(np.array(x, float), XOR_CLOSED_FORM)
    print(f"  x={x}  z={z:+.4f}  y={ic_output(np.array(x, float), XOR_CLOSED_FORM):.4f}")

print("\ntrained from random init, 2000 epochs")
for seed in range(5):
    net, rec, hit = train_xor(seed)
    _, mp_rec, _ = train_xor(seed, "mp")
    layer = net.layers[0]
    print(f"  seed {seed}: IC solved at epoch {hit}, w'={float(layer.w_prime[0]):+.3f}; "
          f"MP best accuracy {max(mp_rec.train_acc):.2f}")
