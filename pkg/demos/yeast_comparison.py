"""IC-FC against its MP twin, the basic variant and a wider MP network on YEAST.

    python3 demos/yeast_comparison.py      # about 20 s
"""
import os

from icnet.cli import run_experiment
from icnet.config import load_config

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")

rows = []
for name in ("yeast_ic_fc.json", "yeast_ic_fc_basic.json", "yeast_wide_fc.json"):
    summary, _ = run_experiment(load_config(os.path.join(CONFIGS, name)), log=lambda s: None)
    for label, net in summary["networks"].items():
        rows.append((name.replace(".json", ""), label, 100 * net["best_accuracy"],
                     [round(100 * a, 2) for a in net["repeat_best_accuracy"]], net["macs"], net["params"]))

print(f"{'config':<20}{'net':<5}{'best-of-3':>10}  {'per repeat':<24}{'MACs':>6}{'params':>8}")
for cfg, label, acc, reps, macs, params in rows:
    print(f"{cfg:<20}{label:<5}{acc:>10.2f}  {str(reps):<24}{macs:>6}{params:>8}")
