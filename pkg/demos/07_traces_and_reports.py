"""Traces, exports, and multi-seed reports.

A run's Trace carries the full per-step event log, per-step group series,
raw per-member checkpoint snapshots, and the cold-refit drift records.
Everything downstream (box statistics, CSV exports, seed-averaged reports)
is a pure function of the Trace, and identical (config, seed) reproduce
identical bytes.
"""

import dataclasses
import json
import tempfile
from pathlib import Path

from loopsim import preset, run_experiment
from loopsim.harness import load_checkpoints_csv

config = preset("open_loop")
config = dataclasses.replace(
    config,
    sizes={"G1": 60, "G2": 60},
    groups={label: dataclasses.replace(params, n_train=100)
            for label, params in config.groups.items()},
    total_steps=2000,
    checkpoints=(0, 1000, 2000),
)

with tempfile.TemporaryDirectory() as tmp:
    result = run_experiment(config, seeds=[1, 2, 3], out_dir=tmp)
    out = Path(tmp)
    print("files written:")
    for path in sorted(out.iterdir()):
        print(f"  {path.name}")

    rows = load_checkpoints_csv(out / "seed_1.checkpoints.csv")
    print(f"\nseed 1 checkpoint rows: {len(rows)} "
          f"(2 groups x 4 statistic families x 3 checkpoints)")

    report = json.loads((out / "report.json").read_text())
    final = report["checkpoints"]["2000"]
    print("\nseed-averaged mean theta at the final checkpoint:")
    for group in ("G1", "G2"):
        print(f"  {group}: {final[group]['theta']['mean']:.4f}")
    print(f"\nbias annotation of the open loop: {report['bias_annotation']} "
          "(no loop, no bias pathway)")
