"""Dense float64 arithmetic and elementwise nonlinearities.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. The helpers here
add the shape checks and conventions the rest of the package relies on:
``relu'(0) == 0`` and a max-shifted softmax.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LabelError

ACTIVATIONS = ("relu", "tanh", "elu", "sigmoid", "identity")


@dataclass(frozen=True)
class Activation:
    kind: str = "relu"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {ACTIVATIONS}")

    @property
    def has_kink(self):
        return self.kind == "relu"


RELU = Activation("relu")
IDENTITY = Activation("identity")


def as_activation(act) -> Activation:
    if isinstance(act, Activation):
        return act
    if act is None:
        return IDENTITY
    return Activation(str(act))


def as_tensor(a) -> np.ndarray:
    """``a`` as a float array; float64 and extended precision pass through."""
    a = np.asarray(a)
    if a.dtype == np.float64 or a.dtype == np.longdouble:
        return a
    return a.astype(np.float64)


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(a, act) -> np.ndarray:
    act = as_activation(act)
    x = as_tensor(a)
    if act.kind == "relu":
        return relu(x)
    if act.kind == "tanh":
        return np.tanh(x)
    if act.kind == "elu":
        return np.where(x >= 0, x, act.alpha * np.expm1(np.minimum(x, 0.0)))
    if act.kind == "sigmoid":
        return _sigmoid(np.atleast_1d(x)).reshape(x.shape)
    return x.copy()


def activate_grad(a, act) -> np.ndarray:
    """Elementwise derivative of ``activate`` evaluated at the pre-activation ``a``."""
    act = as_activation(act)
    x = as_tensor(a)
    if act.kind == "relu":
        return (x > 0).astype(np.float64)
    if act.kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    if act.kind == "elu":
        return np.where(x >= 0, 1.0, act.alpha * np.exp(np.minimum(x, 0.0)))
    if act.kind == "sigmoid":
        s = _sigmoid(np.atleast_1d(x)).reshape(x.shape)
        return s * (1.0 - s)
    return np.ones_like(x)


def softmax(logits) -> np.ndarray:
    z = as_tensor(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of ``softmax(logits)`` against integer labels.

    Returns ``(loss, grad_logits)`` where the gradient already carries the
    ``1/batch`` factor of the mean.
    """
    z = as_tensor(logits)
    if z.ndim != 2 or z.shape[1] < 2:
        raise DimensionError(f"logits must be batch x C with C >= 2, got {z.shape}")
    labels = np.asarray(labels)
    if labels.shape != (z.shape[0],):
        raise DimensionError(f"labels shape {labels.shape} does not match logits {z.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise LabelError(f"labels must lie in [0, {z.shape[1]}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    batch = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = np.mean(log_norm - shifted[rows, labels])
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / batch
