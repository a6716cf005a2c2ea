import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icnet.cost import CostReport, compare_to_twin, count_macs, count_params, layer_cost
from icnet.layers import Conv2D, Dense, LayerSpec, build_network


def fc(n, m, variant="standard"):
    return layer_cost(Dense(n, m, variant), (n,))


def test_dense_parameter_counts():
    assert fc(8, 32, "mp").params == 288
    assert fc(8, 32).params == 352
    assert fc(8, 32, "basic").params == 320
    assert (fc(8, 32).params - fc(8, 32, "mp").params) / fc(8, 32, "mp").weights == 0.25


def test_empty_report():
    assert CostReport().total_params == 0 and CostReport().total_macs == 0


def test_adapters_cost_nothing():
    specs = [LayerSpec("conv2d", 2), LayerSpec("maxpool2d", kernel=2, stride=2),
             LayerSpec("activation", f="tanh"), LayerSpec("flatten")]
    rep = count_params(build_network((1, 6, 6), specs, 3))
    assert [(c.params, c.macs) for c in rep.layers[1:4]] == [(0, 0)] * 3


def test_yeast_costs():
    specs = [LayerSpec("dense", 32), LayerSpec("dense", 16)]
    comp = compare_to_twin(build_network((8,), specs, 10))
    assert (comp.mp.total_macs, comp.mp.total_params) == (928, 986)
    assert (comp.ic.total_macs, comp.ic.total_params) == (1016, 1082)
    assert comp.mp.total_macs / 1000 == pytest.approx(0.98, rel=0.15)
    assert comp.ic.total_macs / 1000 == pytest.approx(1.06, rel=0.15)


def test_mac_overhead_square_layer():
    ic, mp = fc(100, 100), fc(100, 100, "mp")
    assert (ic.macs - mp.macs) / mp.macs == pytest.approx(0.02)


def test_pointwise_conv_overhead():
    layer = Conv2D(48, 40, 1, padding=0, variant="standard")
    ic = layer_cost(layer, (48, 5, 5))
    layer.variant = "mp"
    mp = layer_cost(Conv2D(48, 40, 1, padding=0, variant="mp"), (48, 5, 5))
    assert Fraction(ic.macs - mp.macs, mp.macs) == Fraction(1, 40) + Fraction(1, 48)


@given(st.integers(4, 300), st.integers(4, 300))
def test_dense_parameter_overhead_is_two_over_n(n, m):
    ic, mp = fc(n, m), fc(n, m, "mp")
    assert Fraction(ic.params - mp.params, mp.weights) == Fraction(2, n)


@given(st.integers(32, 400), st.integers(32, 400))
def test_dense_mac_overhead(n, m):
    ic, mp = fc(n, m), fc(n, m, "mp")
    ratio = Fraction(ic.macs - mp.macs, mp.macs)
    assert ratio == Fraction(1, n) + Fraction(1, m)
    assert abs(float(ratio) - (1 / n + 1 / m)) <= 0.1 * (1 / n + 1 / m)


@given(st.integers(32, 96), st.integers(1, 16), st.sampled_from([1, 3, 5]), st.integers(1, 2))
def test_conv_mac_overhead(c_out, c_in, k, stride):
    shape = (c_in, 9, 9)
    ic = layer_cost(Conv2D(c_in, c_out, k, stride, variant="standard"), shape)
    mp = layer_cost(Conv2D(c_in, c_out, k, stride, variant="mp"), shape)
    ratio = Fraction(ic.macs - mp.macs, mp.macs)
    assert ratio == Fraction(1, c_out) + Fraction(1, k * k * c_in)
    if k * k * c_in >= 10 * c_out:
        assert abs(float(ratio) - 1 / c_out) <= 0.1 / c_out


@given(st.lists(st.integers(1, 40), min_size=1, max_size=4), st.sampled_from(["mp", "basic", "standard"]))
def test_totals_are_sums(widths, variant):
    net = build_network((7,), [LayerSpec("dense", w, variant) for w in widths], 3)
    rep = count_macs(net)
    assert rep.total_params == sum(c.params for c in rep.layers)
    assert rep.total_macs == sum(c.macs for c in rep.layers)
    assert rep.total_params == sum(a.size for a in net.parameters().values())


def test_recurrent_macs_scale_with_length():
    net = build_network((3, 4), [LayerSpec("recurrent", 5, out=6)], 2)
    short, long = count_macs(net, (3, 4)), count_macs(net, (6, 4))
    per_step = 4 * 5 + 5 * 5 + 4 + 5
    assert long.layers[0].macs - short.layers[0].macs == 3 * per_step


def test_twin_differs_only_in_unit_type():
    net = build_network((8,), [LayerSpec("dense", 32), LayerSpec("dense", 16)], 10)
    comp = compare_to_twin(net)
    assert [(c.name, c.type) for c in comp.ic.layers] == [(c.name, c.type) for c in comp.mp.layers]
    assert [c.variant for c in comp.mp.layers] == ["mp", "mp", "mp"]
    doc = json.loads(comp.to_json())
    assert doc["layer_overheads"][0]["param_overhead"] == 0.25
    assert comp.to_csv().splitlines()[0] == "network,layer,type,variant,params,macs"
