"""Strict JSON experiment configs.

Unknown keys, wrong types and missing required fields raise
:class:`ConfigError` naming the offending key path, e.g. ``train.epochs``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .layers import LAYER_TYPES, VARIANTS, LayerSpec, build_network
from .numerics import ACTIVATIONS
from .train import TrainConfig

DATASETS = ("xor", "mnist", "yeast", "letter", "adult")


@dataclass
class DatasetConfig:
    name: str
    paths: object = None
    subset: int | None = None
    flatten: bool = False
    split_seed: int | None = None


@dataclass
class ModelConfig:
    layers: list
    w_prime_init: float = 1.0
    twin: bool = True


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    model: ModelConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    output: str | None = None
    name: str = "experiment"
    base_dir: str = "."

    def layer_specs(self, variant=None):
        specs = []
        for spec in self.model.layers:
            spec = LayerSpec(**spec.__dict__)
            if spec.f is None:
                spec.f = self.train.activation or "relu"
            if variant == "mp":
                spec = spec.twin()
            specs.append(spec)
        return specs

    def build(self, input_shape, n_classes, rng, twin=False):
        return build_network(input_shape, self.layer_specs("mp" if twin else None), n_classes, rng,
                             self.model.w_prime_init)

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))


_TYPES = {int: "an integer", float: "a number", str: "a string", bool: "a boolean"}


def _check(value, kind, path, optional=False):
    if value is None and optional:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{path}: expected {_TYPES[kind]}, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(f"{path}: expected {_TYPES[kind]}, got {value!r}")
    return value


def _block(raw, path, spec, required=()):
    """Validate a dict against ``spec = {key: (type, optional)}``."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object, got {type(raw).__name__}")
    for key in raw:
        if key not in spec:
            raise ConfigError(f"{path}.{key}: unknown key (allowed: {', '.join(sorted(spec))})")
    for key in required:
        if key not in raw:
            raise ConfigError(f"{path}.{key}: required key missing")
    out = {}
    for key, value in raw.items():
        kind, optional = spec[key]
        out[key] = value if kind is None else _check(value, kind, f"{path}.{key}", optional)
    return out


def _choice(value, allowed, path):
    if value not in allowed:
        raise ConfigError(f"{path}: {value!r} is not one of {list(allowed)}")
    return value


def _positive(value, path, allow_zero=False):
    if value is not None and (value < 0 or (value == 0 and not allow_zero)):
        raise ConfigError(f"{path}: must be {'>= 0' if allow_zero else '> 0'}, got {value}")
    return value


_LAYER_KEYS = {"type": (str, False), "units": (int, False), "variant": (str, False),
               "f": (str, False), "kernel": (int, False), "stride": (int, False),
               "padding": (int, True), "out": (int, True)}


def _layer(raw, path):
    d = _block(raw, path, _LAYER_KEYS, required=("type",))
    _choice(d["type"], LAYER_TYPES, path + ".type")
    if d["type"] in ("dense", "recurrent", "conv2d"):
        if "units" not in d:
            raise ConfigError(f"{path}.units: required for {d['type']} layers")
        _positive(d["units"], path + ".units")
    if "variant" in d:
        _choice(d["variant"], VARIANTS, path + ".variant")
    if "f" in d:
        _choice(d["f"], ACTIVATIONS, path + ".f")
    for key in ("kernel", "stride", "out"):
        _positive(d.get(key), f"{path}.{key}")
    _positive(d.get("padding"), path + ".padding", allow_zero=True)
    if d["type"] == "maxpool2d":
        d.setdefault("kernel", 2)
        d.setdefault("stride", d["kernel"])
    d.setdefault("f", None)
    return LayerSpec(**d)


def parse_config(raw, base_dir=".") -> ExperimentConfig:
    top = _block(raw, "config", {"name": (str, False), "dataset": (None, False),
                                 "model": (None, False), "train": (None, False),
                                 "output": (str, True)}, required=("dataset", "model"))

    ds = _block(top["dataset"], "dataset", {"name": (str, False), "paths": (None, True),
                                            "subset": (int, True), "flatten": (bool, False),
                                            "split_seed": (int, True)}, required=("name",))
    _choice(ds["name"], DATASETS, "dataset.name")
    _positive(ds.get("subset"), "dataset.subset")
    paths = ds.get("paths")
    if paths is not None and not isinstance(paths, (str, dict)):
        raise ConfigError("dataset.paths: expected a directory string or an object of file paths")
    if isinstance(paths, dict):
        for k, v in paths.items():
            _check(v, str, f"dataset.paths.{k}")

    mdl = _block(top["model"], "model", {"layers": (list, False), "w_prime_init": (float, False),
                                         "twin": (bool, False)}, required=("layers",))
    if not mdl["layers"]:
        raise ConfigError("model.layers: at least one layer is required")
    layers = [_layer(item, f"model.layers[{i}]") for i, item in enumerate(mdl["layers"])]

    tr_spec = {f.name: ({"epochs": int, "batch_size": int, "seed": int, "repeat_count": int,
                         "smoothing_window": int, "rho": float, "epsilon": float,
                         "activation": str}[f.name], f.name == "activation")
               for f in fields(TrainConfig)}
    tr = _block(top.get("train", {}), "train", tr_spec)
    _positive(tr.get("epochs"), "train.epochs", allow_zero=True)
    for key in ("batch_size", "repeat_count", "smoothing_window", "epsilon"):
        _positive(tr.get(key), "train." + key)
    if "rho" in tr and not 0 <= tr["rho"] < 1:
        raise ConfigError(f"train.rho: must lie in [0, 1), got {tr['rho']}")
    if tr.get("activation") is not None:
        _choice(tr["activation"], ACTIVATIONS, "train.activation")

    return ExperimentConfig(
        dataset=DatasetConfig(**ds),
        model=ModelConfig(layers=layers, **{k: v for k, v in mdl.items() if k != "layers"}),
        train=TrainConfig(**tr),
        output=top.get("output"),
        name=top.get("name", "experiment"),
        base_dir=base_dir,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from None
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))


def load_dataset(cfg: ExperimentConfig, subset=None):
    from . import data

    ds = cfg.dataset
    subset = subset if subset is not None else ds.subset
    if ds.name == "xor":
        out = data.make_xor()
    else:
        if ds.paths is None:
            raise ConfigError(f"dataset.paths: required for {ds.name}")
        paths = (cfg.resolve(ds.paths) if isinstance(ds.paths, str)
                 else {k: cfg.resolve(v) for k, v in ds.paths.items()})
        if ds.name == "mnist":
            return data.load_mnist_idx(paths, subset=subset, flatten=ds.flatten)
        kw = {} if ds.split_seed is None else {"seed": ds.split_seed}
        out = data.load_uci_csv(ds.name, paths, **kw)
    return out.subset(subset) if subset is not None else out
