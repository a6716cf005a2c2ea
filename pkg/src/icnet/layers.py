"""Learnable layers built from IC and MP units, with hand-written backward passes.

Every parametrised layer comes in three variants:

``"mp"``
    classical unit, ``z = W x + b``.
``"basic"``
    IC unit with the adjustment weight fixed to 1 (not learnable).
``"standard"``
    IC unit with a learnable adjustment weight per output unit.

``forward`` returns ``(output, cache)``; ``backward(cache, grad_out)`` returns
``(grad_in, grads)`` where ``grads`` maps parameter names to gradients. A
cache is tied to the parameter version it was produced with, so using it
after an optimizer update raises :class:`ContractError`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, DimensionError, FormatError
from .numerics import Activation, activate, activate_grad, as_activation, as_tensor

VARIANTS = ("mp", "basic", "standard")


@dataclass
class Cache:
    layer: "Layer"
    version: int
    data: dict = field(default_factory=dict)
    # smallest |relu argument| per output unit, or None for kink-free layers
    kink_margin: np.ndarray | None = None
    # on/off pattern of every relu-like switch; used to spot kink crossings
    pattern: list = field(default_factory=list)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.version = 0

    def output_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, grad_out):
        raise NotImplementedError

    def param_units(self, name):
        """Unit index for every coordinate of ``params[name]`` (or None)."""
        return None

    def touch(self):
        self.version += 1

    def _new_cache(self, **data):
        return Cache(self, self.version, data)

    def _check_cache(self, cache):
        if not isinstance(cache, Cache) or cache.layer is not self:
            raise ContractError(f"cache does not belong to this {self.kind} layer")
        if cache.version != self.version:
            raise ContractError(f"stale cache for {self.kind} layer: parameters changed "
                                f"since the forward pass (version {cache.version} != {self.version})")

    def describe(self):
        return {"type": self.kind}


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class _ICMixin:
    """Shared parameter handling for the IC-capable layers."""

    def _init_unit_params(self, m, variant, w_prime_init):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        self.variant = variant
        # test hook: False removes the collision branch from an IC layer
        self.branch = variant != "mp"
        if variant == "mp":
            self.params["b"] = np.zeros(m)
        else:
            if variant == "standard":
                self.params["w_prime"] = np.full(m, float(w_prime_init))
            else:
                self._w_prime_const = np.ones(m)
            self.params["b1"] = np.zeros(m)
            self.params["b2"] = np.zeros(m)

    @property
    def is_ic(self):
        return self.variant != "mp"

    @property
    def w_prime(self):
        if self.variant == "standard":
            return self.params["w_prime"]
        if self.variant == "basic":
            return self._w_prime_const
        return None

    def _unit_forward(self, s, xsum):
        """Shared pre-activation for IC/MP units.

        ``s`` holds the weighted sums (rows x m) and ``xsum`` the matching
        input sums (rows x 1). Returns ``(z, h_arg, mask)``.
        """
        if self.variant == "mp":
            return s + self.params["b"], None, None
        h_arg = s - xsum * self.w_prime + self.params["b1"]
        if not self.branch:
            return s + self.params["b2"], h_arg, np.zeros(h_arg.shape, dtype=bool)
        mask = h_arg > 0
        return s + np.where(mask, h_arg, 0.0) + self.params["b2"], h_arg, mask

    def _unit_backward(self, gz, mask, xsum, grads):
        """Gradients w.r.t. the unit parameters. Returns ``(gs, gH)``."""
        if self.variant == "mp":
            grads["b"] = gz.sum(axis=0)
            return gz, None
        gH = gz * mask
        grads["b2"] = gz.sum(axis=0)
        grads["b1"] = gH.sum(axis=0)
        grads["w_prime"] = -(xsum * gH).sum(axis=0)
        return gz + gH, gH

    def _margins(self, h_arg, z):
        m = None
        if h_arg is not None and self.branch:
            m = np.abs(h_arg).min(axis=0)
        if self.f.has_kink:
            mz = np.abs(z).min(axis=0)
            m = mz if m is None else np.minimum(m, mz)
        return m

    def _unit_param_units(self, name):
        if name in ("w_prime", "b1", "b2", "b"):
            return np.arange(self.params[name].shape[0])
        return None


class Dense(_ICMixin, Layer):
    """Fully-connected layer of ``m`` IC or MP units on ``n`` inputs."""

    kind = "dense"

    def __init__(self, n, m, variant="standard", f="relu", rng=None, w_prime_init=1.0):
        super().__init__()
        self.n, self.m = int(n), int(m)
        self.f = as_activation(f)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = _uniform(rng, self.n, (self.n, self.m))
        self._init_unit_params(self.m, variant, w_prime_init)

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.n,):
            raise DimensionError(f"dense layer expects input shape ({self.n},), got {tuple(in_shape)}")
        return (self.m,)

    def forward(self, x):
        x = as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.n:
            raise DimensionError(f"dense layer expects batch x {self.n}, got {x.shape}")
        s = x @ self.params["W"]
        xsum = x.sum(axis=1, keepdims=True)
        z, h_arg, mask = self._unit_forward(s, xsum)
        cache = self._new_cache(x=x, xsum=xsum, z=z, mask=mask)
        cache.kink_margin = self._margins(h_arg, z)
        cache.pattern = [p for p in (mask, z > 0 if self.f.has_kink else None) if p is not None]
        return activate(z, self.f), cache

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        d = cache.data
        gz = as_tensor(grad_out) * activate_grad(d["z"], self.f)
        grads = {}
        gs, gH = self._unit_backward(gz, d["mask"], d["xsum"], grads)
        W = self.params["W"]
        grads["W"] = d["x"].T @ gs
        grad_x = gs @ W.T
        if gH is not None:
            grad_x -= (gH @ self.w_prime)[:, None]
        return grad_x, grads

    def param_units(self, name):
        if name == "W":
            return np.broadcast_to(np.arange(self.m), (self.n, self.m))
        return self._unit_param_units(name)

    def describe(self):
        return {"type": "dense", "n": self.n, "m": self.m, "variant": self.variant,
                "f": self.f.kind}


class Recurrent(_ICMixin, Layer):
    """Elman-style recurrent layer; the IC branch acts on the input term only.

    Consumes ``batch x T x n`` sequences and emits ``W_hy`` applied to the
    final hidden state.
    """

    kind = "recurrent"

    def __init__(self, n, h, m, variant="standard", f="relu", rng=None, w_prime_init=1.0):
        super().__init__()
        self.n, self.h, self.m = int(n), int(h), int(m)
        self.f = as_activation(f)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W_xh"] = _uniform(rng, self.n, (self.n, self.h))
        self.params["W_hh"] = _uniform(rng, self.h, (self.h, self.h))
        self.params["W_hy"] = _uniform(rng, self.h, (self.h, self.m))
        self._init_unit_params(self.h, variant, w_prime_init)

    def output_shape(self, in_shape):
        if len(in_shape) != 2 or in_shape[1] != self.n:
            raise DimensionError(f"recurrent layer expects (T, {self.n}) sequences, got {tuple(in_shape)}")
        return (self.m,)

    def step(self, x_t, h_prev):
        x_t = as_tensor(x_t)
        h_prev = as_tensor(h_prev)
        if x_t.ndim != 2 or x_t.shape[1] != self.n:
            raise DimensionError(f"recurrent step expects batch x {self.n} input, got {x_t.shape}")
        if h_prev.shape != (x_t.shape[0], self.h):
            raise DimensionError(f"hidden state must be {(x_t.shape[0], self.h)}, got {h_prev.shape}")
        s = x_t @ self.params["W_xh"]
        xsum = x_t.sum(axis=1, keepdims=True)
        z, h_arg, mask = self._unit_forward(s, xsum)
        z = z + h_prev @ self.params["W_hh"]
        step = {"x": x_t, "xsum": xsum, "h_prev": h_prev, "z": z, "mask": mask, "h_arg": h_arg}
        return activate(z, self.f), step

    def forward(self, x_seq, h0=None):
        x_seq = as_tensor(x_seq)
        if x_seq.ndim != 3 or x_seq.shape[2] != self.n:
            raise DimensionError(f"recurrent layer expects batch x T x {self.n}, got {x_seq.shape}")
        if x_seq.shape[1] < 1:
            raise ContractError("recurrent layer needs a sequence of length T >= 1")
        h = np.zeros((x_seq.shape[0], self.h)) if h0 is None else as_tensor(h0)
        steps, margins, pattern = [], [], []
        for t in range(x_seq.shape[1]):
            h, st = self.step(x_seq[:, t, :], h)
            steps.append(st)
            mg = self._margins(st["h_arg"], st["z"])
            if mg is not None:
                margins.append(mg)
            if st["mask"] is not None:
                pattern.append(st["mask"])
            if self.f.has_kink:
                pattern.append(st["z"] > 0)
        y = h @ self.params["W_hy"]
        cache = self._new_cache(steps=steps, h_T=h)
        cache.kink_margin = np.min(margins, axis=0) if margins else None
        cache.pattern = pattern
        return y, cache

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        gy = as_tensor(grad_out)
        steps = cache.data["steps"]
        P = self.params
        total = {name: np.zeros_like(v) for name, v in P.items()}
        total["w_prime"] = np.zeros(self.h)
        total["W_hy"] = cache.data["h_T"].T @ gy
        gh = gy @ P["W_hy"].T
        grad_x = np.zeros((gh.shape[0], len(steps), self.n))
        for t in range(len(steps) - 1, -1, -1):
            st = steps[t]
            gz = gh * activate_grad(st["z"], self.f)
            g = {}
            gs, gH = self._unit_backward(gz, st["mask"], st["xsum"], g)
            g["W_xh"] = st["x"].T @ gs
            g["W_hh"] = st["h_prev"].T @ gz
            for name, val in g.items():
                total[name] += val
            gx = gs @ P["W_xh"].T
            if gH is not None:
                gx -= (gH @ self.w_prime)[:, None]
            grad_x[:, t, :] = gx
            gh = gz @ P["W_hh"].T
        if self.variant == "mp":
            del total["w_prime"]
        cache.data["grad_h0"] = gh
        return grad_x, total

    def param_units(self, name):
        if name == "W_xh":
            return np.broadcast_to(np.arange(self.h), (self.n, self.h))
        if name == "W_hh":
            return np.broadcast_to(np.arange(self.h), (self.h, self.h))
        if name == "W_hy":
            return None
        return self._unit_param_units(name)

    def describe(self):
        return {"type": "recurrent", "n": self.n, "h": self.h, "m": self.m,
                "variant": self.variant, "f": self.f.kind}


def conv_output_extent(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


def _windows(xp, k, stride):
    """``B x C x Hp x Wp`` -> rows of flattened windows, ``(B*Ho*Wo) x (C*k*k)``."""
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, Ho, Wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * k * k)
    return cols, Ho, Wo


class Conv2D(_ICMixin, Layer):
    """2-D convolution whose kernels are IC (or MP) units.

    The all-ones window sum is computed once per spatial position and shared
    by every output channel.
    """

    kind = "conv2d"

    def __init__(self, c_in, c_out, k, stride=1, padding=None, variant="standard", f="relu",
                 rng=None, w_prime_init=1.0):
        super().__init__()
        self.c_in, self.c_out, self.k = int(c_in), int(c_out), int(k)
        self.stride = int(stride)
        self.padding = self.k // 2 if padding is None else int(padding)
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")
        self.f = as_activation(f)
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = self.c_in * self.k * self.k
        self.params["K"] = _uniform(rng, fan_in, (self.c_out, self.c_in, self.k, self.k))
        self._init_unit_params(self.c_out, variant, w_prime_init)

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.c_in:
            raise DimensionError(f"conv layer expects ({self.c_in}, H, W) input, got {tuple(in_shape)}")
        _, H, W = in_shape
        if H + 2 * self.padding < self.k or W + 2 * self.padding < self.k:
            raise DimensionError(f"{self.k}x{self.k} window larger than padded input {H}x{W} "
                                 f"(padding {self.padding})")
        return (self.c_out, conv_output_extent(H, self.k, self.stride, self.padding),
                conv_output_extent(W, self.k, self.stride, self.padding))

    def forward(self, x):
        x = as_tensor(x)
        if x.ndim != 4:
            raise DimensionError(f"conv layer expects batch x C x H x W, got {x.shape}")
        self.output_shape(x.shape[1:])
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols, Ho, Wo = _windows(xp, self.k, self.stride)
        Kmat = self.params["K"].reshape(self.c_out, -1)
        s = cols @ Kmat.T
        wsum = cols.sum(axis=1, keepdims=True)
        z, h_arg, mask = self._unit_forward(s, wsum)
        cache = self._new_cache(cols=cols, wsum=wsum, z=z, mask=mask, x_shape=x.shape,
                                xp_shape=xp.shape, Ho=Ho, Wo=Wo)
        cache.kink_margin = self._margins(h_arg, z)
        cache.pattern = [q for q in (mask, z > 0 if self.f.has_kink else None) if q is not None]
        B = x.shape[0]
        u = activate(z, self.f).reshape(B, Ho, Wo, self.c_out).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(u), cache

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        d = cache.data
        B, Ho, Wo = d["x_shape"][0], d["Ho"], d["Wo"]
        g = as_tensor(grad_out).transpose(0, 2, 3, 1).reshape(B * Ho * Wo, self.c_out)
        gz = g * activate_grad(d["z"], self.f)
        grads = {}
        gs, gH = self._unit_backward(gz, d["mask"], d["wsum"], grads)
        Kmat = self.params["K"].reshape(self.c_out, -1)
        grads["K"] = (gs.T @ d["cols"]).reshape(self.params["K"].shape)
        gcols = gs @ Kmat
        if gH is not None:
            gcols -= (gH @ self.w_prime)[:, None]
        grad_x = self._col2im(gcols, d["xp_shape"], Ho, Wo)
        p = self.padding
        if p:
            grad_x = grad_x[:, :, p:-p, p:-p]
        return np.ascontiguousarray(grad_x), grads

    def _col2im(self, gcols, xp_shape, Ho, Wo):
        B, C, Hp, Wp = xp_shape
        k, s = self.k, self.stride
        g = gcols.reshape(B, Ho, Wo, C, k, k)
        out = np.zeros(xp_shape)
        for i in range(k):
            for j in range(k):
                out[:, :, i:i + s * Ho:s, j:j + s * Wo:s] += g[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return out

    def param_units(self, name):
        if name == "K":
            return np.broadcast_to(np.arange(self.c_out)[:, None, None, None], self.params["K"].shape)
        return self._unit_param_units(name)

    def describe(self):
        return {"type": "conv2d", "c_in": self.c_in, "c_out": self.c_out, "k": self.k,
                "stride": self.stride, "padding": self.padding, "variant": self.variant,
                "f": self.f.kind}


class MaxPool2D(Layer):
    """Max pooling; identical in IC and MP networks."""

    kind = "maxpool2d"

    def __init__(self, k=2, stride=None):
        super().__init__()
        self.k = int(k)
        self.stride = int(stride or k)

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise DimensionError(f"max pool expects (C, H, W) input, got {tuple(in_shape)}")
        C, H, W = in_shape
        if H < self.k or W < self.k:
            raise DimensionError(f"pool window {self.k} larger than input {H}x{W}")
        return (C, conv_output_extent(H, self.k, self.stride, 0),
                conv_output_extent(W, self.k, self.stride, 0))

    def forward(self, x):
        x = as_tensor(x)
        self.output_shape(x.shape[1:])
        win = sliding_window_view(x, (self.k, self.k), axis=(2, 3))[:, :, ::self.stride, ::self.stride]
        flat = win.reshape(*win.shape[:4], -1)
        arg = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        cache = self._new_cache(arg=arg, x_shape=x.shape)
        cache.pattern = [arg]
        return y, cache

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        arg, shape = cache.data["arg"], cache.data["x_shape"]
        B, C, Ho, Wo = arg.shape
        grad_x = np.zeros(shape)
        di, dj = np.divmod(arg, self.k)
        bi, ci, oi, oj = np.indices(arg.shape)
        np.add.at(grad_x, (bi, ci, oi * self.stride + di, oj * self.stride + dj), grad_out)
        return grad_x, {}

    def describe(self):
        return {"type": "maxpool2d", "k": self.k, "stride": self.stride}


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        x = as_tensor(x)
        return x.reshape(x.shape[0], -1), self._new_cache(shape=x.shape)

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        return np.asarray(grad_out).reshape(cache.data["shape"]), {}


class ActivationLayer(Layer):
    kind = "activation"

    def __init__(self, f="relu"):
        super().__init__()
        self.f = as_activation(f)

    def forward(self, x):
        x = as_tensor(x)
        cache = self._new_cache(x=x)
        if self.f.has_kink:
            cache.kink_margin = None
            cache.pattern = [x > 0]
        return activate(x, self.f), cache

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        return grad_out * activate_grad(cache.data["x"], self.f), {}

    def describe(self):
        return {"type": "activation", "f": self.f.kind}


class Linear(Layer):
    """Plain affine classifier head, no activation."""

    kind = "linear"

    def __init__(self, n, c, rng=None):
        super().__init__()
        self.n, self.c = int(n), int(c)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = _uniform(rng, self.n, (self.n, self.c))
        self.params["b"] = np.zeros(self.c)

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.n,):
            raise DimensionError(f"linear head expects input shape ({self.n},), got {tuple(in_shape)}")
        return (self.c,)

    def forward(self, x):
        x = as_tensor(x)
        return x @ self.params["W"] + self.params["b"], self._new_cache(x=x)

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        x = cache.data["x"]
        return grad_out @ self.params["W"].T, {"W": x.T @ grad_out, "b": grad_out.sum(axis=0)}

    def describe(self):
        return {"type": "linear", "n": self.n, "c": self.c}


# Functional entry points mirroring the layer methods.

def fc_forward(layer: Dense, x):
    return layer.forward(x)


def fc_backward(layer: Dense, cache, grad_y):
    """Returns ``(grad_x, grad_W, grad_w_prime, grad_b1, grad_b2)``."""
    grad_x, g = layer.backward(cache, grad_y)
    if layer.variant == "mp":
        return grad_x, g["W"], None, None, g["b"]
    return grad_x, g["W"], g["w_prime"], g["b1"], g["b2"]


def rnn_step(cell: Recurrent, x_t, h_prev):
    return cell.step(x_t, h_prev)


def rnn_forward_sequence(cell: Recurrent, x_seq, h0=None):
    return cell.forward(x_seq, h0)


def conv_forward(layer: Conv2D, x):
    return layer.forward(x)


def conv_backward(layer: Conv2D, cache, grad_u):
    return layer.backward(cache, grad_u)


class Network:
    """Ordered stack of layers followed by a linear classifier head."""

    def __init__(self, layers, head: Linear, input_shape):
        self.layers = list(layers)
        self.head = head
        self.input_shape = tuple(int(s) for s in input_shape)
        shape = self.input_shape
        self.shapes = [shape]
        for i, layer in enumerate(self.layers + [head]):
            try:
                shape = layer.output_shape(shape)
            except DimensionError as exc:
                name = "head" if layer is head else f"layer {i} ({layer.kind})"
                raise DimensionError(f"{name}: {exc}") from None
            self.shapes.append(shape)

    @property
    def all_layers(self):
        return self.layers + [self.head]

    def _layer_name(self, i):
        return "head" if i == len(self.layers) else str(i)

    def parameters(self):
        """Flat ordered mapping ``"<layer>.<param>" -> array`` (live references)."""
        out = {}
        for i, layer in enumerate(self.all_layers):
            for name, arr in layer.params.items():
                out[f"{self._layer_name(i)}.{name}"] = arr
        return out

    def forward(self, x):
        x = as_tensor(x)
        if x.shape[1:] != self.input_shape:
            raise DimensionError(f"network expects inputs of shape {self.input_shape}, got {x.shape[1:]}")
        caches = []
        for layer in self.all_layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, grad_logits):
        """Gradients for every parameter, keyed like :meth:`parameters`.

        Gradients of non-learnable quantities (the fixed adjustment weight of
        basic layers) are included under their name but never applied.
        """
        grads = {}
        g = grad_logits
        for i in range(len(self.all_layers) - 1, -1, -1):
            g, lg = self.all_layers[i].backward(caches[i], g)
            for name, val in lg.items():
                grads[f"{self._layer_name(i)}.{name}"] = val
        return grads

    def logits(self, x, batch_size=1024):
        x = as_tensor(x)
        out = [self.forward(x[i:i + batch_size])[0] for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.head.c))

    def apply_updates(self, deltas):
        params = self.parameters()
        for name, delta in deltas.items():
            params[name] += delta
        self.touch()

    def touch(self):
        for layer in self.all_layers:
            layer.touch()

    def describe(self):
        return {"input_shape": list(self.input_shape),
                "layers": [layer.describe() for layer in self.all_layers]}

    def save(self, path):
        save_params(self.parameters(), path)

    def load(self, path):
        loaded = load_params(path)
        params = self.parameters()
        if set(loaded) != set(params):
            raise FormatError(f"parameter names differ: file has {sorted(loaded)}, "
                              f"network has {sorted(params)}")
        for name, arr in loaded.items():
            if arr.shape != params[name].shape:
                raise FormatError(f"{name}: shape {arr.shape} != {params[name].shape}")
            params[name][...] = arr
        self.touch()


# Flat little-endian parameter container:
#   b"ICN1", u32 version, u32 entry count,
#   then per entry: u32 name length, utf-8 name, u32 ndim, ndim x u32 extents,
#   row-major float64 payload.
PARAM_MAGIC = b"ICN1"
PARAM_VERSION = 1


def save_params(params, path):
    with open(path, "wb") as fh:
        fh.write(PARAM_MAGIC + struct.pack("<II", PARAM_VERSION, len(params)))
        for name, arr in params.items():
            raw = name.encode("utf-8")
            arr = np.asarray(arr, dtype="<f8", order="C")
            fh.write(struct.pack("<I", len(raw)) + raw)
            fh.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(nbytes, what):
        nonlocal pos
        if pos + nbytes > len(data):
            raise FormatError(f"truncated parameter file while reading {what} at byte {pos}")
        chunk = data[pos:pos + nbytes]
        pos += nbytes
        return chunk

    if take(4, "magic") != PARAM_MAGIC:
        raise FormatError("bad magic at byte 0: not an ICN1 parameter file")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != PARAM_VERSION:
        raise FormatError(f"unsupported parameter file version {version} at byte 4")
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4, "name length"))
        name = take(nlen, "name").decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, "rank"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, "shape"))
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(take(8 * size, name), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(data):
        raise FormatError(f"trailing bytes after last entry at byte {pos}")
    return out


@dataclass
class LayerSpec:
    """Declarative description of one layer, as read from a config file."""

    type: str
    units: int = 0
    variant: str = "standard"
    f: str = "relu"
    kernel: int = 3
    stride: int = 1
    padding: int | None = None
    out: int | None = None

    def twin(self):
        """The same layer with the collision branch removed."""
        if self.type in ("dense", "recurrent", "conv2d"):
            return LayerSpec(**{**self.__dict__, "variant": "mp"})
        return LayerSpec(**self.__dict__)


LAYER_TYPES = ("dense", "recurrent", "conv2d", "maxpool2d", "flatten", "activation")


def build_network(input_shape, specs, n_classes, rng=None, w_prime_init=1.0):
    """Instantiate ``specs`` on ``input_shape`` and add a linear head.

    Weight draws depend only on layer shapes and order, so an IC network and
    its MP twin built from the same generator state get identical ``W``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    shape = tuple(input_shape)
    layers = []
    for i, spec in enumerate(specs):
        if spec.type not in LAYER_TYPES:
            raise ValueError(f"layer {i}: unknown type {spec.type!r}")
        if spec.type == "dense":
            if len(shape) != 1:
                layers.append(Flatten())
                shape = layers[-1].output_shape(shape)
            layer = Dense(shape[0], spec.units, spec.variant, spec.f, rng, w_prime_init)
        elif spec.type == "recurrent":
            if len(shape) != 2:
                raise DimensionError(f"layer {i}: recurrent layer needs (T, n) inputs, got {shape}")
            layer = Recurrent(shape[1], spec.units, spec.out or spec.units, spec.variant, spec.f,
                              rng, w_prime_init)
        elif spec.type == "conv2d":
            if len(shape) != 3:
                raise DimensionError(f"layer {i}: conv2d needs (C, H, W) inputs, got {shape}")
            layer = Conv2D(shape[0], spec.units, spec.kernel, spec.stride, spec.padding,
                           spec.variant, spec.f, rng, w_prime_init)
        elif spec.type == "maxpool2d":
            layer = MaxPool2D(spec.kernel, spec.stride)
        elif spec.type == "flatten":
            layer = Flatten()
        else:
            layer = ActivationLayer(spec.f)
        try:
            shape = layer.output_shape(shape)
        except DimensionError as exc:
            raise DimensionError(f"layer {i} ({spec.type}): {exc}") from None
        layers.append(layer)
    if len(shape) != 1:
        layers.append(Flatten())
        shape = layers[-1].output_shape(shape)
    head = Linear(shape[0], n_classes, rng)
    return Network(layers, head, input_shape)


def mp_twin(net: Network) -> Network:
    """Copy of ``net`` with every IC layer turned into an MP layer.

    Connection weights are shared by value and the outer bias ``b2`` becomes
    the MP bias, so the twin is what the IC network computes with its
    collision branch switched off.
    """
    import copy

    twin = copy.deepcopy(net)
    for layer in twin.layers:
        if getattr(layer, "variant", "mp") != "mp":
            b2 = layer.params.pop("b2")
            layer.params.pop("b1")
            layer.params.pop("w_prime", None)
            layer._w_prime_const = None
            layer.params["b"] = b2
            layer.variant = "mp"
            layer.branch = False
    twin.touch()
    return twin
