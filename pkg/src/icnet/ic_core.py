"""Scalar and single-unit mathematics of the inter-layer collision (IC) neuron.

A unit with connection weights ``w``, adjustment weight ``w_prime`` and the two
biases computes::

    s = w . x
    z = s + relu(s - w_prime * sum(x) + b1) + b2

The relu branch is live only on one side of the hyperplane
``H = sum((w_i - w_prime) * x_i) = 0``, so a unit is linear on each side with
two different slopes. ``w_prime == 1`` is the basic unit; a learnable
``w_prime`` rotates the hyperplane about the plane spanned by ``w`` and the
all-ones vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError
from .numerics import Activation, activate


def collision_unit(x: float, w: float) -> float:
    """Single-input collision transfer ``w*x + relu((w-1)*x)``."""
    return w * x + max((w - 1.0) * x, 0.0)


@dataclass
class ICParams:
    """Weights of one IC unit.

    ``b1`` sits inside the relu branch and ``b2`` outside it. Use
    :meth:`basic` for the fixed ``w_prime == 1`` form.
    """

    w: np.ndarray
    w_prime: float = 1.0
    b1: float = 0.0
    b2: float = 0.0
    learn_w_prime: bool = True
    n: int = field(init=False)

    def __post_init__(self):
        self.w = np.atleast_1d(np.asarray(self.w, dtype=np.float64))
        if self.w.ndim != 1 or self.w.size < 1:
            raise DimensionError(f"w must be a non-empty vector, got shape {self.w.shape}")
        self.n = self.w.size
        self.w_prime = float(self.w_prime)
        if not self.learn_w_prime and self.w_prime != 1.0:
            raise ContractError("basic IC parameters require w_prime == 1")

    @classmethod
    def basic(cls, w, b1=0.0, b2=0.0):
        return cls(w, 1.0, b1, b2, learn_w_prime=False)

    @classmethod
    def standard(cls, w, w_prime=1.0, b1=0.0, b2=0.0):
        return cls(w, w_prime, b1, b2, learn_w_prime=True)

    @property
    def is_basic(self):
        return not self.learn_w_prime


def _check_input(x, p: ICParams) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (p.n,):
        raise DimensionError(f"input of shape {x.shape} does not match unit with n={p.n}")
    return x


def ic_preactivation(x, p: ICParams) -> float:
    """Value of the unit before its outer activation."""
    x = _check_input(x, p)
    s = float(p.w @ x)
    return s + max(s - p.w_prime * float(x.sum()) + p.b1, 0.0) + p.b2


def ic_output(x, p: ICParams, f="relu") -> float:
    f = f if isinstance(f, Activation) else Activation(f)
    return float(activate(np.array([ic_preactivation(x, p)]), f)[0])


def piecewise_branches(x, p: ICParams):
    """Which linear piece of a basic, bias-free unit ``x`` falls on.

    Returns ``("upper", 2*w.x - sum(x))`` when ``H >= 0`` and
    ``("lower", w.x)`` otherwise.
    """
    if p.w_prime != 1.0 or p.b1 != 0.0 or p.b2 != 0.0:
        raise ContractError("piecewise_branches needs w_prime == 1 and zero biases")
    x = _check_input(x, p)
    s = float(p.w @ x)
    h = float((p.w - 1.0) @ x)
    if h >= 0:
        return "upper", 2.0 * s - float(x.sum())
    return "lower", s


@dataclass(frozen=True)
class HyperplaneReport:
    normal: np.ndarray
    cos_theta: float
    degenerate: bool


def hyperplane_cos_angle(w, w_prime: float, rtol: float = 1e-12) -> HyperplaneReport:
    """Angle between the partition hyperplane's normal and the all-ones vector.

    ``w`` parallel to the all-ones vector makes the normal itself parallel to
    it (or zero); that case is flagged as degenerate and the cosine is the
    sign of the numerator.
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    n = w.size
    if n < 2:
        raise DimensionError(f"hyperplane geometry needs n >= 2, got n={n}")
    w_prime = float(w_prime)
    normal = w - w_prime
    total = math.fsum(w)
    mean = total / n
    scale = max(float(np.max(np.abs(w))), 1e-300)
    degenerate = bool(np.max(np.abs(w - mean)) <= rtol * scale)
    if w_prime == mean:
        numerator = 0.0
    else:
        numerator = total - n * w_prime
    if degenerate:
        cos = float(np.sign(numerator))
    else:
        cos = numerator / (math.sqrt(n) * float(np.linalg.norm(normal)))
        cos = min(1.0, max(-1.0, cos))
    return HyperplaneReport(normal=normal, cos_theta=cos, degenerate=degenerate)


def cos_angle_sweep(w, w_primes):
    """Evaluate :func:`hyperplane_cos_angle` over many adjustment weights."""
    return np.array([hyperplane_cos_angle(w, wp).cos_theta for wp in w_primes])


# Closed-form single-unit XOR solution. The inner bias is 0.6463 and the outer
# bias -0.3506 (inner/outer placement as in ``ic_preactivation``).
XOR_CLOSED_FORM = ICParams.basic(w=[0.2805, 0.2805], b1=0.6463, b2=-0.3506)
