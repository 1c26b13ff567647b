"""Sampling feedback loop: who leaves the platform, who replaces them.

Users who receive no recommendation leave; replacements are drawn with
probability proportional to current group shares (homophily).  Group 2
starts with lower interest, receives fewer recommendations, and shrinks
toward a small stable core of its most interested members, so the platform
ends up with a representation bias that no single decision ever intended.

This is a scaled-down run (200 users, 8000 steps) so it finishes in a few
seconds; the full-size experiment lives behind `loopsim run --preset
sampling`.
"""

import dataclasses

import numpy as np

from loopsim import detect_equilibrium, preset, run

config = preset("sampling")
config = dataclasses.replace(
    config,
    sizes={"G1": 99, "G2": 101},
    groups={label: dataclasses.replace(params, n_train=150)
            for label, params in config.groups.items()},
    total_steps=8000,
    checkpoints=(0, 500, 2000, 4000, 8000),
)

print("seed | G2 count at checkpoints 0/500/2000/4000/8000 | equilibrium step")
counts_all = []
for seed in range(5):
    trace = run(config, seed=seed)
    counts = [int((trace.checkpoint(s).group_idx == 1).sum())
              for s in config.checkpoints]
    counts_all.append(trace.series_counts[:, 1])
    t_star = detect_equilibrium(trace.series_counts[:, 1].astype(float),
                                tolerance=5.0, window=2000)
    print(f"  {seed}  | {counts} | {t_star}")

mean_series = np.mean(counts_all, axis=0)
t_star = detect_equilibrium(mean_series, tolerance=5.0, window=2000)
print(f"\nseed-averaged G2 count settles around {mean_series[-1]:.0f} "
      f"(equilibrium detected at step {t_star})")
print("the survivors are the high-interest tail: the sample is no longer "
      "representative of the group it came from")
