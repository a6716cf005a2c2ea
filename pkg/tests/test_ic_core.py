import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from icnet.errors import ContractError, DimensionError
from icnet.ic_core import (XOR_CLOSED_FORM, ICParams, collision_unit, cos_angle_sweep,
                           hyperplane_cos_angle, ic_output, ic_preactivation, piecewise_branches)

XOR_POINTS = [(0, 0), (1, 0), (0, 1), (1, 1)]


@pytest.mark.parametrize("x,w,expected", [(7.3, 1.0, 7.3), (1.0, 2.0, 3.0), (2.0, 0.5, 1.0)])
def test_collision_unit(x, w, expected):
    assert collision_unit(x, w) == pytest.approx(expected)


def test_xor_closed_form_outputs():
    out = [ic_output(np.array(p, float), XOR_CLOSED_FORM, "relu") for p in XOR_POINTS]
    assert out[0] == pytest.approx(0.2957, abs=1e-4)
    assert out[1] == 0.0 and out[2] == 0.0
    assert out[3] == pytest.approx(0.2104, abs=1e-4)


def test_xor_closed_form_margin():
    out = {p: ic_output(np.array(p, float), XOR_CLOSED_FORM, "relu") for p in XOR_POINTS}
    margin = min(out[(0, 0)], out[(1, 1)]) - max(out[(1, 0)], out[(0, 1)])
    assert margin >= 0.2


def test_inner_and_outer_bias_placement():
    p = XOR_CLOSED_FORM
    assert p.b1 == 0.6463 and p.b2 == -0.3506 and p.is_basic


def test_inactive_branch_gives_weighted_sum(rng):
    w = rng.uniform(-1, 0.5, size=4)
    x = rng.uniform(0.1, 1, size=4)
    p = ICParams.basic(w)
    assert (w - 1) @ x < 0
    assert ic_preactivation(x, p) == float(w @ x)


def test_preactivation_length_mismatch():
    with pytest.raises(DimensionError):
        ic_preactivation(np.ones(3), ICParams.basic([1.0, 2.0]))


def test_basic_constructor_pins_w_prime():
    p = ICParams.basic([1.0, 2.0])
    assert p.w_prime == 1.0 and not p.learn_w_prime
    with pytest.raises(ContractError):
        ICParams([1.0], w_prime=2.0, learn_w_prime=False)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(-3, 3), st.floats(-3, 3),
       st.integers(0, 2**31))
def test_standard_with_unit_adjustment_equals_basic(w, b1, b2, seed):
    x = np.random.default_rng(seed).uniform(-5, 5, size=len(w))
    assert ic_preactivation(x, ICParams.standard(w, 1.0, b1, b2)) == \
        ic_preactivation(x, ICParams.basic(w, b1, b2))


def test_piecewise_examples():
    assert piecewise_branches([1, 1], ICParams.basic([2, 2])) == ("upper", 6.0)
    branch, value = piecewise_branches([2, -1], ICParams.basic([0.6, 0.3]))
    assert branch == "lower" and value == pytest.approx(0.9)
    assert piecewise_branches([0, 0, 0], ICParams.basic([0.3, -2, 4])) == ("upper", 0.0)


def test_piecewise_rejects_non_basic_params():
    with pytest.raises(ContractError):
        piecewise_branches([1, 1], ICParams.standard([1, 1], w_prime=0.5))
    with pytest.raises(ContractError):
        piecewise_branches([1, 1], ICParams.basic([1, 1], b1=0.1))


@given(st.integers(2, 17), st.integers(0, 2**31))
def test_piecewise_equals_direct_evaluation(n, seed):
    g = np.random.default_rng(seed)
    x, w = g.uniform(-5, 5, n), g.uniform(-5, 5, n)
    p = ICParams.basic(w)
    _, value = piecewise_branches(x, p)
    assert abs(value - ic_preactivation(x, p)) <= 1e-12


def test_cos_angle_examples():
    assert hyperplane_cos_angle([1, 0], 0.5).cos_theta == 0.0
    assert hyperplane_cos_angle([1, 0], 0.0).cos_theta == pytest.approx(1 / math.sqrt(2))
    assert hyperplane_cos_angle([1, 0], 100.0).cos_theta == pytest.approx(-0.99999, abs=1e-5)


def test_cos_angle_normal_vector():
    assert np.array_equal(hyperplane_cos_angle([3.0, 1.0], 2.0).normal, [1.0, -1.0])


def test_degenerate_weights_are_flagged():
    r = hyperplane_cos_angle([1.0, 1.0], 0.0)
    assert r.degenerate and r.cos_theta == 1.0
    assert hyperplane_cos_angle([1.0, 1.0], 3.0).cos_theta == -1.0
    assert hyperplane_cos_angle([1.0, 1.0], 1.0).cos_theta == 0.0
    assert not hyperplane_cos_angle([1.0, 0.0], 1.0).degenerate


def test_cos_angle_needs_two_inputs():
    with pytest.raises(DimensionError):
        hyperplane_cos_angle([1.0], 0.0)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=8), st.floats(-1e3, 1e3))
def test_cos_angle_range(w, wp):
    r = hyperplane_cos_angle(w, wp)
    assert -1.0 <= r.cos_theta <= 1.0
    if not r.degenerate and np.ptp(w) > 1e-3 and abs(wp) < 1e2:
        assert -1.0 < r.cos_theta < 1.0


@given(st.integers(2, 8), st.integers(0, 2**31))
def test_cos_angle_strictly_decreasing(n, seed):
    w = np.random.default_rng(seed).normal(size=n)
    c = cos_angle_sweep(w, np.linspace(-1e3, 1e3, 1000))
    assert np.all(np.diff(c) < 0)
    assert c[0] == pytest.approx(1.0, abs=1e-3) and c[-1] == pytest.approx(-1.0, abs=1e-3)
    assert hyperplane_cos_angle(w, -1e6).cos_theta == pytest.approx(1.0, abs=1e-6)
    assert hyperplane_cos_angle(w, 1e6).cos_theta == pytest.approx(-1.0, abs=1e-6)


@given(st.integers(2, 8), st.integers(0, 2**31), st.floats(-50, 50))
def test_normal_stays_in_span_of_w_and_ones(n, seed, wp):
    w = np.random.default_rng(seed).normal(size=n)
    normal = hyperplane_cos_angle(w, wp).normal
    basis, _ = np.linalg.qr(np.stack([w, np.ones(n)], axis=1))
    residual = normal - basis @ (basis.T @ normal)
    assert np.abs(residual).max() <= 1e-12 * max(1.0, np.abs(normal).max())
