"""Outcome feedback loop: decisions change the outcomes they predict.

A recommendation makes a click 0.2 more likely; withholding one makes it
0.2 less likely.  The retrained model faithfully learns these *shifted*
outcomes, so its predictions drift away from the users' true interest
until the loop reaches a stable equilibrium: measurement bias on the
outcome channel, reflected as a persistent signed prediction error per
group.
"""

import dataclasses

from loopsim import detect_equilibrium, preset, run

config = preset("outcome")
config = dataclasses.replace(
    config,
    sizes={"G1": 100, "G2": 100},
    groups={label: dataclasses.replace(params, n_train=150)
            for label, params in config.groups.items()},
    total_steps=12_000,
    checkpoints=(0, 1000, 4000, 12_000),
)

trace = run(config, seed=0)

print("checkpoint | mean(yhat - theta) G1 | G2")
for s in config.checkpoints:
    snap = trace.checkpoint(s)
    errs = snap.y_hat - snap.theta
    g1 = errs[snap.group_idx == 0].mean()
    g2 = errs[snap.group_idx == 1].mean()
    print(f"  {s:>7}  | {g1:+.4f}               | {g2:+.4f}")

for gi, label in enumerate(trace.group_labels):
    series = trace.series_mean_yhat[:, gi] - trace.series_mean_theta[:, gi]
    t_star = detect_equilibrium(series, tolerance=0.02, window=3000)
    print(f"{label}: prediction-error series reaches equilibrium at step {t_star}")

print("\nthe model is well calibrated against what it caused, and "
      "mis-calibrated against what the users actually wanted")
