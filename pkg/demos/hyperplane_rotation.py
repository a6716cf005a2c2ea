"""How the adjustment weight w' swings the partition hyperplane.

The normal of H is w - w'*1. As w' runs from -inf to +inf the cosine with the
all-ones direction falls from +1 to -1, crossing 0 at w' = mean(w).

    python3 demos/hyperplane_rotation.py
"""
import numpy as np

from icnet.ic_core import hyperplane_cos_angle

w = np.array([0.9, -0.3, 0.4])
print(f"w = {w}, mean(w) = {w.mean():.4f}")
for wp in (-1e6, -100, -1, 0, w.mean(), 0.5, 1, 100, 1e6):
    r = hyperplane_cos_angle(w, wp)
    print(f"  w'={wp:>10.4g}  cos={r.cos_theta:+.6f}  normal={np.round(r.normal, 3)}")

print("\nw parallel to ones is flagged:", hyperplane_cos_angle([2.0, 2.0, 2.0], 1.0))
