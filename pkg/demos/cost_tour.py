"""Parameter and MAC overhead of IC layers over their MP twins.

    python3 demos/cost_tour.py
"""
import numpy as np

from icnet.cost import compare_to_twin
from icnet.layers import LayerSpec, build_network

g = np.random.default_rng(0)
nets = {
    "yeast 8-32-16-10": build_network((8,), [LayerSpec("dense", 32), LayerSpec("dense", 16)], 10, g),
    "mnist 784-256-128-10": build_network((784,), [LayerSpec("dense", 256), LayerSpec("dense", 128)],
                                          10, g),
    "mnist cnn": build_network((1, 28, 28), [LayerSpec("conv2d", 32, kernel=3, stride=1),
                                             LayerSpec("conv2d", 64, kernel=3, stride=2),
                                             LayerSpec("conv2d", 64, kernel=3, stride=2),
                                             LayerSpec("flatten"), LayerSpec("dense", 256)], 10, g),
}
for name, net in nets.items():
    c = compare_to_twin(net)
    print(f"{name}: IC {c.ic.total_macs} MACs / {c.ic.total_params} params, "
          f"MP {c.mp.total_macs} / {c.mp.total_params}  "
          f"(+{100 * c.mac_overhead:.2f}% MACs, +{100 * c.param_overhead:.2f}% params)")
    for row in c.layer_overheads():
        if row["param_overhead"]:
            print(f"    layer {row['name']:<3} {row['type']:<7} params +{100 * row['param_overhead']:.3f}%"
                  f"  MACs +{100 * row['mac_overhead']:.3f}%")
