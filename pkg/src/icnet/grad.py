"""Central-difference oracle for checking hand-derived gradients."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError
from .numerics import softmax_cross_entropy


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def finite_diff(lossfn, params, step=1e-6, coords=None):
    """Central differences of ``lossfn()`` w.r.t. arrays in ``params``.

    ``params`` maps names to arrays that ``lossfn`` reads; they are perturbed
    in place and restored. ``params`` may also be a bare array. ``coords``
    optionally restricts each name to a list of flat indices (others stay 0).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    single = isinstance(params, np.ndarray)
    items = {"_": params} if single else params
    out = {}
    for name, arr in items.items():
        g = np.zeros(arr.shape)
        flat = arr.reshape(-1)
        if not np.shares_memory(flat, arr):
            raise ContractError(f"{name}: parameter array must be contiguous")
        idx = range(flat.size) if coords is None else coords.get(name, ())
        gflat = g.reshape(-1)
        for i in idx:
            old = flat[i]
            flat[i] = old + step
            fp = lossfn()
            flat[i] = old - step
            fm = lossfn()
            flat[i] = old
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while probing {name}[{i}]")
            gflat[i] = (fp - fm) / (2.0 * step)
        out[name] = g
    return out["_"] if single else out


@dataclass
class GradReport:
    tolerance: float
    max_rel_error: dict = field(default_factory=dict)
    failing: list = field(default_factory=list)
    checked: int = 0
    excluded: int = 0
    excluded_by_param: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failing

    def to_text(self):
        lines = [f"gradcheck tolerance={self.tolerance:g} checked={self.checked} "
                 f"kink_excluded={self.excluded} status={'PASS' if self.passed else 'FAIL'}"]
        for name, err in self.max_rel_error.items():
            lines.append(f"  {name:<24} max_rel_error={err:.3e} "
                         f"excluded={self.excluded_by_param.get(name, 0)}")
        for name, idx, a, n, err in self.failing[:20]:
            lines.append(f"  FAIL {name}{list(idx)} analytic={a:.10e} numeric={n:.10e} rel={err:.3e}")
        if len(self.failing) > 20:
            lines.append(f"  ... {len(self.failing) - 20} more failing coordinates")
        return "\n".join(lines)


EXTENDED = np.longdouble if np.finfo(np.longdouble).eps < np.finfo(np.float64).eps else np.float64


def extended_copy(net):
    """Deep copy of ``net`` with every parameter held in extended precision."""
    clone = copy.deepcopy(net)
    for layer in clone.all_layers:
        for name, arr in layer.params.items():
            layer.params[name] = arr.astype(EXTENDED)
        if getattr(layer, "_w_prime_const", None) is not None:
            layer._w_prime_const = layer._w_prime_const.astype(EXTENDED)
    return clone


def _pattern(caches):
    return [p.copy() for c in caches for p in c.pattern]


def _same_pattern(a, b):
    return len(a) == len(b) and all(np.array_equal(p, q) for p, q in zip(a, b))


def gradcheck(net, x, labels, tolerance=1e-4, step=1e-6, kink_threshold=1e-3,
              max_coords=None, rng=None, analytic_hook=None) -> GradReport:
    """Compare ``net.backward`` with central differences of the batch loss.

    A coordinate is excluded (and counted) when it feeds a unit whose relu
    argument (collision branch or relu activation) is within
    ``kink_threshold`` of zero for some example, or when the +/- probes move
    any relu switch. ``max_coords`` samples at most that many coordinates per
    parameter. ``analytic_hook`` may rewrite the analytic gradients (used as a
    negative control).
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if len(x) == 0:
        raise ContractError("gradcheck needs a non-empty batch")
    logits, caches = net.forward(x)
    _, glogits = softmax_cross_entropy(logits, labels)
    analytic = net.backward(caches, glogits)
    if analytic_hook is not None:
        analytic = analytic_hook(analytic)
    base_pattern = _pattern(caches)

    near = {}
    for i, (layer, cache) in enumerate(zip(net.all_layers, caches)):
        if cache.kink_margin is None:
            continue
        close = cache.kink_margin < kink_threshold
        for pname in layer.params:
            units = layer.param_units(pname)
            if units is not None:
                near[f"{net._layer_name(i)}.{pname}"] = close[units]

    probe_net = extended_copy(net)
    xp = x.astype(EXTENDED)
    params = probe_net.parameters()
    report = GradReport(tolerance=tolerance)
    rng = rng if rng is not None else np.random.default_rng(0)
    crossed = []

    def lossfn():
        lg, cs = probe_net.forward(xp)
        if not _same_pattern(_pattern(cs), base_pattern):
            crossed.append(True)
        return softmax_cross_entropy(lg, labels)[0]

    for name, arr in params.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        excluded_mask = near.get(name)
        a_flat = np.asarray(analytic[name]).reshape(-1)
        worst = 0.0
        n_excl = 0
        for i in idx:
            if excluded_mask is not None and excluded_mask.reshape(-1)[i]:
                n_excl += 1
                continue
            crossed.clear()
            num = finite_diff(lossfn, {name: arr}, step, coords={name: [i]})[name].reshape(-1)[i]
            if crossed:
                n_excl += 1
                continue
            err = float(relative_error(a_flat[i], num))
            report.checked += 1
            worst = max(worst, err)
            if err > tolerance:
                report.failing.append((name, np.unravel_index(i, arr.shape), float(a_flat[i]),
                                       float(num), err))
        report.max_rel_error[name] = worst
        report.excluded_by_param[name] = n_excl
        report.excluded += n_excl
    return report
