"""Cross-entropy training with Adadelta, per-epoch tracking and best-of-N repeats."""
from __future__ import annotations

import csv
import math
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, DivergenceError
from .numerics import softmax_cross_entropy


def rng_stream(seed, *path):
    """Independent generator for a named stream, e.g. ``("repeat", 2, "init")``.

    Streams are keyed by the base seed and the path, so adding a stream never
    shifts the numbers drawn by another.
    """
    key = tuple(zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def adadelta_step(params, grads, state, rho=0.9, epsilon=1e-6):
    """One Adadelta update on dicts of arrays.

    Returns ``(new_params, new_state)``; names missing from ``params`` (such
    as the fixed adjustment weight of basic layers) are ignored. ``state``
    maps names to ``(E[g^2], E[dx^2])`` pairs and may start empty.
    """
    new_params, new_state = {}, {}
    for name, p in params.items():
        g = grads[name]
        sq_g, sq_dx = state.get(name, (np.zeros_like(p), np.zeros_like(p)))
        sq_g = rho * sq_g + (1.0 - rho) * g * g
        delta = -np.sqrt(sq_dx + epsilon) / np.sqrt(sq_g + epsilon) * g
        sq_dx = rho * sq_dx + (1.0 - rho) * delta * delta
        new_params[name] = p + delta
        new_state[name] = (sq_g, sq_dx)
    return new_params, new_state


class Adadelta:
    """Stateful Adadelta that updates a :class:`Network` in place."""

    def __init__(self, rho=0.9, epsilon=1e-6):
        self.rho = rho
        self.epsilon = epsilon
        self.sq_g = {}
        self.sq_dx = {}

    def step(self, net, grads):
        rho, eps = self.rho, self.epsilon
        deltas = {}
        for name, p in net.parameters().items():
            g = grads[name]
            if name not in self.sq_g:
                self.sq_g[name] = np.zeros_like(p)
                self.sq_dx[name] = np.zeros_like(p)
            sq_g = self.sq_g[name]
            sq_g *= rho
            sq_g += (1.0 - rho) * g * g
            delta = -np.sqrt(self.sq_dx[name] + eps) / np.sqrt(sq_g + eps) * g
            self.sq_dx[name] *= rho
            self.sq_dx[name] += (1.0 - rho) * delta * delta
            deltas[name] = delta
        net.apply_updates(deltas)


def smooth_curve(values, window=5):
    """Trailing moving average; early points average the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = [float(v) for v in values]
    out = []
    for i in range(len(values)):
        chunk = values[max(0, i - window + 1):i + 1]
        # offset by the first value so constant runs come back unchanged
        out.append(chunk[0] + math.fsum(v - chunk[0] for v in chunk) / len(chunk))
    return out


def evaluate(net, x, labels, batch_size=1024):
    """Top-1 accuracy; ties go to the lowest class index."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ContractError("cannot evaluate on an empty split")
    pred = np.argmax(net.logits(x, batch_size), axis=1)
    return float(np.mean(pred == labels))


def mean_loss(net, x, labels, batch_size=1024):
    total = 0.0
    for i in range(0, len(labels), batch_size):
        loss, _ = softmax_cross_entropy(net.forward(x[i:i + batch_size])[0], labels[i:i + batch_size])
        total += float(loss) * len(labels[i:i + batch_size])
    return total / len(labels)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    rho: float = 0.9
    epsilon: float = 1e-6
    seed: int = 0
    repeat_count: int = 3
    smoothing_window: int = 5
    activation: str | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.repeat_count < 1 or self.smoothing_window < 1:
            raise ValueError("repeat_count and smoothing_window must be >= 1")


@dataclass
class RunRecord:
    """Per-epoch log of one training run; index 0 is the untrained network."""

    train_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    test_acc_smoothed: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    repeat: int = 0

    @property
    def epochs(self):
        return len(self.test_acc) - 1

    @property
    def best_accuracy(self):
        """Peak of the smoothed test curve."""
        return max(self.test_acc_smoothed)

    @property
    def final_accuracy(self):
        return self.test_acc_smoothed[-1]

    def write_csv(self, path):
        """Deterministic curve file (wall-clock times go to :meth:`write_timings`)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_acc", "test_acc", "test_acc_smoothed", "loss"])
            for e in range(len(self.test_acc)):
                w.writerow([e, repr(self.train_acc[e]), repr(self.test_acc[e]),
                            repr(self.test_acc_smoothed[e]), repr(self.loss[e])])

    def write_timings(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "seconds"])
            for e, s in enumerate(self.seconds):
                w.writerow([e, f"{s:.6f}"])


def train(net, data, config: TrainConfig, repeat=0, on_epoch=None) -> RunRecord:
    """Train ``net`` in place on ``data`` (a :class:`~icnet.data.Dataset`).

    Batches are reshuffled every epoch from the stream
    ``(seed, "repeat", repeat, "shuffle-epoch", e)``.
    """
    xtr, ytr = data.x_train, data.y_train
    if xtr.shape[1:] != net.input_shape:
        raise ContractError(f"dataset features {xtr.shape[1:]} do not match network input "
                            f"{net.input_shape}")
    opt = Adadelta(config.rho, config.epsilon)
    rec = RunRecord(repeat=repeat)

    def log(loss, seconds):
        rec.train_acc.append(evaluate(net, xtr, ytr))
        rec.test_acc.append(evaluate(net, data.x_test, data.y_test))
        rec.loss.append(loss)
        rec.seconds.append(seconds)

    log(mean_loss(net, xtr, ytr), 0.0)
    n = len(ytr)
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng_stream(config.seed, "repeat", repeat, "shuffle-epoch", epoch).permutation(n)
        total = 0.0
        for i in range(0, n, bs):
            idx = order[i:i + bs]
            logits, caches = net.forward(xtr[idx])
            loss, glogits = softmax_cross_entropy(logits, ytr[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            total += float(loss) * len(idx)
            opt.step(net, net.backward(caches, glogits))
        log(total / n, time.perf_counter() - t0)
        if on_epoch is not None:
            on_epoch(epoch, rec)
    rec.test_acc_smoothed = smooth_curve(rec.test_acc, config.smoothing_window)
    return rec


@dataclass
class RepeatResult:
    runs: list
    nets: list = field(default_factory=list)

    @property
    def best_index(self):
        # first run wins ties
        scores = [r.best_accuracy for r in self.runs]
        return scores.index(max(scores))

    @property
    def best_run(self) -> RunRecord:
        return self.runs[self.best_index]

    @property
    def best_net(self):
        return self.nets[self.best_index] if self.nets else None

    @property
    def best_accuracy(self):
        return self.best_run.best_accuracy


def train_repeats(make_net, data, config: TrainConfig, on_epoch=None) -> RepeatResult:
    """Best-of-``repeat_count`` protocol.

    ``make_net(rng)`` builds a fresh network from the init stream of each
    repeat, so an IC network and its MP twin built by the same factory shape
    see identical initial weights and batch orders.
    """
    result = RepeatResult([])
    for r in range(config.repeat_count):
        net = make_net(rng_stream(config.seed, "repeat", r, "init"))
        result.runs.append(train(net, data, config, repeat=r, on_epoch=on_epoch))
        result.nets.append(net)
    return result


def config_dict(config: TrainConfig):
    return asdict(config)
