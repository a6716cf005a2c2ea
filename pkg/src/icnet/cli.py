"""Command-line entry point: ``icnet {train,gradcheck,analyze,xor-demo,count}``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import load_config, load_dataset
from .cost import compare_to_twin
from .data import make_xor
from .errors import ConfigError, DivergenceError, ICNetError
from .grad import gradcheck
from .ic_core import XOR_CLOSED_FORM, cos_angle_sweep, hyperplane_cos_angle, ic_output
from .layers import LayerSpec, build_network
from .train import TrainConfig, config_dict, rng_stream, train, train_repeats

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args, cfg=None):
    out = args.out or (cfg.resolve(cfg.output) if cfg is not None and cfg.output else None)
    if out:
        os.makedirs(out, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    return cfg


def branch_activity(net, x):
    """Fraction of (example, unit) pairs whose collision branch is on."""
    _, caches = net.forward(x)
    on = total = 0
    for cache in caches:
        masks = [cache.data.get("mask")] + [s["mask"] for s in cache.data.get("steps", [])]
        for m in masks:
            if m is not None:
                on += int(m.sum())
                total += m.size
    return on / total if total else 0.0


def run_experiment(cfg, subset=None, twin=True, out=None, log=print):
    """Best-of-N training of the configured network and (optionally) its MP twin."""
    data = load_dataset(cfg, subset)
    if out:
        os.makedirs(out, exist_ok=True)
    shape, classes = data.input_shape, data.n_classes
    variants = [("ic", False)] + ([("mp", True)] if twin and cfg.model.twin else [])
    summary = {"name": cfg.name, "dataset": {"name": data.name, "train": len(data.y_train),
                                             "test": len(data.y_test), "sha256": data.fingerprint()},
               "train": config_dict(cfg.train), "networks": {}}
    results = {}
    for label, is_twin in variants:
        res = train_repeats(lambda rng: cfg.build(shape, classes, rng, twin=is_twin), data, cfg.train)
        results[label] = res
        best = res.best_run
        net = res.best_net
        cost = compare_to_twin(net).ic
        summary["networks"][label] = {
            "architecture": net.describe(),
            "best_accuracy": best.best_accuracy,
            "best_repeat": res.best_index,
            "repeat_best_accuracy": [r.best_accuracy for r in res.runs],
            "final_test_accuracy": best.test_acc[-1],
            "final_smoothed_accuracy": best.final_accuracy,
            "final_train_accuracy": best.train_acc[-1],
            "final_loss": best.loss[-1],
            "params": cost.total_params,
            "macs": cost.total_macs,
            "branch_activity": branch_activity(net, data.x_test[:1024]),
        }
        log(f"{label}: best-of-{cfg.train.repeat_count} smoothed test accuracy "
            f"{100 * best.best_accuracy:.2f}% (repeat {res.best_index}), "
            f"{cost.total_params} params, {cost.total_macs} MACs")
        if out:
            suffix = "" if label == "ic" else "_mp"
            best.write_csv(os.path.join(out, f"curves{suffix}.csv"))
            best.write_timings(os.path.join(out, f"timings{suffix}.csv"))
            net.save(os.path.join(out, f"params{suffix}.icn1"))
    if "mp" in results:
        summary["ic_minus_mp"] = (summary["networks"]["ic"]["best_accuracy"]
                                  - summary["networks"]["mp"]["best_accuracy"])
    if out:
        _dump_json(summary, os.path.join(out, "summary.json"))
    return summary, results


def cmd_train(args):
    cfg = _load(args)
    out = _out_dir(args, cfg)
    try:
        run_experiment(cfg, args.subset, not args.no_twin, out)
    except DivergenceError as exc:
        print(f"error: training diverged at epoch {exc.epoch}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _corrupt(grads):
    return {k: v * 1.01 + 1e-3 for k, v in grads.items()}


def cmd_gradcheck(args):
    cfg = _load(args)
    data = load_dataset(cfg, args.subset)
    rng = rng_stream(cfg.train.seed, "gradcheck")
    idx = np.sort(rng.choice(len(data.y_train), size=min(args.batch, len(data.y_train)),
                             replace=False))
    x, y = data.x_train[idx], data.y_train[idx]
    status = EXIT_OK
    lines = []
    labels = [("ic", False)] + ([("mp", True)] if cfg.model.twin and not args.no_twin else [])
    for label, is_twin in labels:
        net = cfg.build(data.input_shape, data.n_classes, rng_stream(cfg.train.seed, "repeat", 0, "init"),
                        twin=is_twin)
        report = gradcheck(net, x, y, max_coords=args.max_coords,
                           rng=rng_stream(cfg.train.seed, "gradcheck", label),
                           analytic_hook=_corrupt if args.corrupt_gradient else None)
        lines.append(f"[{label}] " + report.to_text())
        if not report.passed:
            status = EXIT_FAIL
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out = _out_dir(args)
    if out:
        with open(os.path.join(out, "gradcheck.txt"), "w") as fh:
            fh.write(text)
    return status


def parse_sweep(spec):
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"sweep {spec!r}: expected start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ConfigError(f"sweep {spec!r}: count must be >= 1")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [float(v) for v in spec.split(",") if v.strip()]


def cmd_analyze(args):
    w = [float(v) for v in args.w.split(",") if v.strip()]
    if len(w) < 2:
        print("error: --w needs at least two weights (n >= 2)", file=sys.stderr)
        return EXIT_USAGE
    sweep = parse_sweep(args.sweep)
    if args.include_orthogonal:
        sweep = sorted(set(sweep) | {sum(w) / len(w)})
    degenerate = hyperplane_cos_angle(w, 0.0).degenerate
    cos = cos_angle_sweep(w, sweep)
    rows = [(wp, c, int(degenerate)) for wp, c in zip(sweep, cos)]
    out = _out_dir(args)
    target = open(os.path.join(out, "analyze.csv"), "w", newline="") if out else sys.stdout
    try:
        wr = csv.writer(target, lineterminator="\n")
        wr.writerow(["w_prime", "cos_theta", "degenerate"])
        for wp, c, d in rows:
            wr.writerow([repr(wp), repr(float(c)), d])
    finally:
        if out:
            target.close()
    if out:
        print(f"wrote {len(rows)} rows to {os.path.join(out, 'analyze.csv')}"
              + (" (degenerate: w is parallel to the all-ones vector)" if degenerate else ""))
    return EXIT_OK


XOR_TRAIN = TrainConfig(epochs=2000, batch_size=4, repeat_count=1)
XOR_W_PRIME_INIT = -1.0


def xor_network(rng, variant="standard", w_prime_init=XOR_W_PRIME_INIT):
    """One unit on two inputs followed by a two-way softmax (a logistic head).

    IC units use an identity outer activation so the head supplies the only
    squashing; the MP unit keeps its relu.
    """
    f = "relu" if variant == "mp" else "identity"
    return build_network((2,), [LayerSpec("dense", 1, variant, f)], 2, rng, w_prime_init)


def train_xor(seed, variant="standard", epochs=2000):
    """Returns ``(net, record, first epoch with 4/4 training accuracy or None)``."""
    cfg = TrainConfig(**{**config_dict(XOR_TRAIN), "epochs": epochs, "seed": seed})
    net = xor_network(rng_stream(seed, "repeat", 0, "init"), variant)
    rec = train(net, make_xor(), cfg)
    hit = next((e for e, a in enumerate(rec.train_acc) if a == 1.0), None)
    return net, rec, hit


def cmd_xor_demo(args):
    d = make_xor()
    order = [(0, 0), (1, 0), (0, 1), (1, 1)]
    print("closed-form IC unit: w = (0.2805, 0.2805), b1 = 0.6463, b2 = -0.3506, f = relu")
    print("x1 x2  label  output")
    outs = {}
    for x in order:
        label = int(d.y_train[[tuple(r) for r in d.x_train.astype(int)].index(x)])
        outs[x] = ic_output(np.array(x, float), XOR_CLOSED_FORM, "relu")
        print(f"{x[0]:>2} {x[1]:>2}  {label:>5}  {outs[x]:.4f}")
    margin = min(outs[(0, 0)], outs[(1, 1)]) - max(outs[(1, 0)], outs[(0, 1)])
    print(f"separation margin {margin:.4f}")
    seed = 0 if args.seed is None else args.seed
    _, rec, hit = train_xor(seed, epochs=args.epochs)
    rows = [("closed_form", f"{x[0]}{x[1]}", repr(outs[x])) for x in order]
    rows += [("trained", "epochs_to_separation", str(hit) if hit is not None else "none"),
             ("trained", "final_train_acc", repr(rec.train_acc[-1]))]
    out = _out_dir(args)
    if out:
        with open(os.path.join(out, "xor.csv"), "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["kind", "key", "value"])
            wr.writerows(rows)
    if hit is None:
        print(f"trained IC neuron (seed {seed}) did not reach 4/4 within {args.epochs} epochs "
              f"(best {max(rec.train_acc):.2f})", file=sys.stderr)
        return EXIT_FAIL
    print(f"trained IC neuron (seed {seed}) reached 4/4 at epoch {hit}")
    return EXIT_OK


def cmd_count(args):
    cfg = _load(args)
    if cfg.dataset.name == "xor":
        shape, classes = (2,), 2
    else:
        data = load_dataset(cfg, 1)
        shape, classes = data.input_shape, data.n_classes
    net = cfg.build(shape, classes, rng_stream(cfg.train.seed, "repeat", 0, "init"))
    comp = compare_to_twin(net)
    text = comp.to_json()
    sys.stdout.write(text)
    print(f"IC: {comp.ic.total_macs / 1000:.3f} kMACs / {comp.ic.total_params / 1000:.3f} k params; "
          f"MP: {comp.mp.total_macs / 1000:.3f} kMACs / {comp.mp.total_params / 1000:.3f} k params")
    out = _out_dir(args)
    if out:
        with open(os.path.join(out, "cost.json"), "w") as fh:
            fh.write(text)
        with open(os.path.join(out, "cost.csv"), "w") as fh:
            fh.write(comp.to_csv())
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="icnet", description="IC-neuron networks from scratch.")
    p.add_argument("--version", action="version", version=f"icnet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--subset", type=int, help="use the first N training examples")
        sp.add_argument("--no-twin", action="store_true", help="skip the MP twin")

    sp = sub.add_parser("train", help="best-of-N training of a config and its MP twin")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    common(sp)
    sp.add_argument("--batch", type=int, default=8)
    sp.add_argument("--max-coords", type=int, default=None,
                    help="sample at most this many coordinates per parameter")
    sp.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("analyze", help="cos(theta) of the partition hyperplane over a w' sweep")
    sp.add_argument("--w", required=True, help="comma-separated weights, n >= 2")
    sp.add_argument("--sweep", default="-1000:1000:2001", help="start:stop:count or a list")
    sp.add_argument("--include-orthogonal", action="store_true",
                    help="add the w' at which the normal is orthogonal to the all-ones vector")
    sp.add_argument("--out", help="output directory (default: stdout)")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("xor-demo", help="closed-form and trained single-neuron XOR")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int, default=2000)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_xor_demo)

    sp = sub.add_parser("count", help="parameter and MAC counts against the MP twin")
    common(sp)
    sp.set_defaults(func=cmd_count)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ICNetError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
