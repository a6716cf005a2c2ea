import os

import numpy as np
import pytest
from hypothesis import settings

from icnet.layers import LayerSpec, build_network

settings.register_profile("icnet", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("icnet")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")
CONFIGS = os.path.join(ROOT, "configs")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_net(kind, variant, f, seed):
    g = np.random.default_rng(seed)
    if kind == "fc":
        shape, specs = (6,), [LayerSpec("dense", 5, variant, f), LayerSpec("dense", 4, variant, f)]
    elif kind == "rnn":
        shape, specs = (3, 4), [LayerSpec("recurrent", 5, variant, f, out=4)]
    else:
        shape, specs = (1, 4, 4), [LayerSpec("conv2d", 2, variant, f, kernel=3, padding=1)]
    net = build_network(shape, specs, 3, g)
    for name, arr in net.parameters().items():
        if name.endswith(("b1", "b2", ".b")):
            arr[...] = g.normal(scale=0.3, size=arr.shape)
        if name.endswith("w_prime"):
            arr[...] += g.normal(scale=0.3, size=arr.shape)
    return net, g.normal(size=(4,) + shape), g.integers(0, 3, 4)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
