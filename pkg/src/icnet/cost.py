"""Parameter and multiply-accumulate accounting.

Only multiply-accumulates are counted; plain additions, comparisons and
activations are free. Per unit, the IC form needs one extra pass over its
inputs for the window sum (``n`` MACs, shared by all units of a layer) and one
multiply by the adjustment weight. Basic units skip that multiply.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .layers import Conv2D, Dense, Linear, Network, Recurrent, mp_twin


@dataclass
class LayerCost:
    name: str
    type: str
    variant: str
    params: int
    weights: int
    macs: int


@dataclass
class CostReport:
    layers: list = field(default_factory=list)
    input_shape: tuple = ()

    @property
    def total_params(self):
        return sum(c.params for c in self.layers)

    @property
    def total_macs(self):
        return sum(c.macs for c in self.layers)

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "total_params": self.total_params,
                "total_macs": self.total_macs, "layers": [asdict(c) for c in self.layers]}


def _unit_extra(layer, units):
    return units if layer.variant == "standard" else 0


def layer_cost(layer, in_shape, name="") -> LayerCost:
    learn = int(sum(p.size for p in layer.params.values()))
    variant = getattr(layer, "variant", "mp")
    if isinstance(layer, Dense):
        n, m = layer.n, layer.m
        weights = n * m
        macs = n * m
        if variant != "mp":
            macs += n + _unit_extra(layer, m)
    elif isinstance(layer, Recurrent):
        T = in_shape[0]
        n, h = layer.n, layer.h
        weights = n * h + h * h + h * layer.m
        macs = T * (n * h + h * h) + h * layer.m
        if variant != "mp":
            macs += T * (n + _unit_extra(layer, h))
    elif isinstance(layer, Conv2D):
        _, Ho, Wo = layer.output_shape(in_shape)
        window = layer.c_in * layer.k * layer.k
        weights = window * layer.c_out
        macs = Ho * Wo * window * layer.c_out
        if variant != "mp":
            macs += Ho * Wo * (window + _unit_extra(layer, layer.c_out))
    elif isinstance(layer, Linear):
        weights = layer.n * layer.c
        macs = weights
    else:
        weights = 0
        macs = 0
    return LayerCost(name, layer.kind, variant, learn, weights, int(macs))


def cost_report(net: Network, input_shape=None) -> CostReport:
    shape = tuple(net.input_shape if input_shape is None else input_shape)
    report = CostReport(input_shape=shape)
    for i, layer in enumerate(net.all_layers):
        report.layers.append(layer_cost(layer, shape, net._layer_name(i)))
        shape = layer.output_shape(shape)
    return report


def count_params(net: Network) -> CostReport:
    return cost_report(net)


def count_macs(net: Network, input_shape=None) -> CostReport:
    """MACs per example; ``input_shape`` may change e.g. the sequence length."""
    return cost_report(net, input_shape)


@dataclass
class Comparison:
    """IC network against its MP twin.

    Per-layer parameter overhead is the extra count divided by the MP layer's
    connection weights (``2/n`` for a standard dense layer); MAC overhead is
    relative to the MP layer's MACs (``1/n + 1/m``). Network totals are
    relative to the MP totals.
    """

    ic: CostReport
    mp: CostReport

    def layer_overheads(self):
        rows = []
        for a, b in zip(self.ic.layers, self.mp.layers):
            rows.append({
                "name": a.name, "type": a.type,
                "param_overhead": (a.params - b.params) / b.weights if b.weights else 0.0,
                "mac_overhead": (a.macs - b.macs) / b.macs if b.macs else 0.0,
            })
        return rows

    @property
    def param_overhead(self):
        return (self.ic.total_params - self.mp.total_params) / self.mp.total_params

    @property
    def mac_overhead(self):
        return (self.ic.total_macs - self.mp.total_macs) / self.mp.total_macs

    def to_dict(self):
        return {"ic": self.ic.to_dict(), "mp": self.mp.to_dict(),
                "param_overhead": self.param_overhead, "mac_overhead": self.mac_overhead,
                "layer_overheads": self.layer_overheads()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["network", "layer", "type", "variant", "params", "macs"])
        for label, rep in (("ic", self.ic), ("mp", self.mp)):
            for c in rep.layers:
                w.writerow([label, c.name, c.type, c.variant, c.params, c.macs])
            w.writerow([label, "total", "", "", rep.total_params, rep.total_macs])
        return buf.getvalue()


def compare_to_twin(net: Network, input_shape=None) -> Comparison:
    return Comparison(cost_report(net, input_shape), cost_report(mp_twin(net), input_shape))


def kilo(x):
    return float(np.round(x / 1000.0, 2))
