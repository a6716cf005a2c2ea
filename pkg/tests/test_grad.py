import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icnet.errors import NumericError
from icnet.grad import finite_diff, gradcheck, relative_error
from conftest import random_net
from icnet.layers import LayerSpec, build_network


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1e-9, 0.0) == pytest.approx(0.1)
    assert relative_error(2.0, 1.0) == 0.5


def test_finite_diff_quadratic():
    theta = np.array([3.0])
    g = finite_diff(lambda: float(theta[0] ** 2), theta, 1e-6)
    assert g[0] == pytest.approx(6.0, abs=1e-6)


def test_finite_diff_constant():
    theta = {"a": np.arange(4.0)}
    assert not np.any(finite_diff(lambda: 2.5, theta)["a"])


def test_finite_diff_restores_parameters():
    theta = np.array([1.0, 2.0])
    finite_diff(lambda: float(theta @ theta), theta)
    assert np.array_equal(theta, [1.0, 2.0])


def test_finite_diff_non_finite_loss():
    theta = np.array([0.0])
    with pytest.raises(NumericError):
        finite_diff(lambda: float("nan"), theta)
    with pytest.raises(ValueError):
        finite_diff(lambda: 0.0, theta, step=0.0)


def yeast_net(seed=0, variant="standard"):
    return build_network((8,), [LayerSpec("dense", 32, variant), LayerSpec("dense", 16, variant)], 10,
                         np.random.default_rng(seed))


def test_fresh_yeast_net_passes(rng):
    report = gradcheck(yeast_net(), rng.normal(size=(8, 8)), rng.integers(0, 10, 8))
    assert report.passed
    assert max(report.max_rel_error.values()) < 1e-4
    assert "0.w_prime" in report.max_rel_error


def test_corrupted_gradient_is_caught(rng):
    def corrupt(grads):
        grads = dict(grads)
        grads["0.b1"] = grads["0.b1"] + 1e-2
        return grads

    report = gradcheck(yeast_net(), rng.normal(size=(8, 8)), rng.integers(0, 10, 8),
                       analytic_hook=corrupt)
    assert not report.passed
    assert {f[0] for f in report.failing} == {"0.b1"}
    assert "FAIL 0.b1" in report.to_text()


def test_boundary_batch_is_fully_excluded():
    net = build_network((3,), [LayerSpec("dense", 4, "standard", "tanh")], 2, np.random.default_rng(0))
    report = gradcheck(net, np.zeros((2, 3)), np.array([0, 1]))
    for name in ("0.W", "0.w_prime", "0.b1", "0.b2"):
        assert report.excluded_by_param[name] == net.parameters()[name].size
    assert report.passed and report.excluded > 0
    assert "kink_excluded=" in report.to_text()


@settings(max_examples=25)
@given(st.sampled_from(["fc", "rnn", "conv"]), st.sampled_from(["standard", "basic", "mp"]),
       st.sampled_from(["relu", "tanh", "elu"]), st.integers(0, 2**31))
def test_backward_matches_oracle(kind, variant, f, seed):
    net, x, y = random_net(kind, variant, f, seed)
    report = gradcheck(net, x, y)
    assert report.passed, report.to_text()
