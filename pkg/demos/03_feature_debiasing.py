"""Feature feedback loop: interaction data can *remove* measurement bias.

Group 2's observable click rate starts 0.2 below its true interest (a
systematic measurement bias), while both groups share the same true
interest distribution.  Because the loop replaces the stale measurement
with the user's accumulating click record, the error x - theta shrinks
toward zero and its variance drops below the initial measurement noise:
one of the cases where a feedback loop is corrective, not harmful.
"""

import dataclasses

from loopsim import measurement_error_stats, preset, run

config = preset("feature")
config = dataclasses.replace(
    config,
    sizes={"G1": 100, "G2": 100},
    groups={label: dataclasses.replace(params, n_train=150)
            for label, params in config.groups.items()},
    total_steps=10_000,
    checkpoints=(0, 1000, 3000, 10_000),
)

trace = run(config, seed=1)

print("checkpoint | G2 mean(x-theta) | G2 var | G1 mean(x-theta) | G1 var")
for s in config.checkpoints:
    stats = measurement_error_stats(trace, s)
    snap = trace.checkpoint(s)
    var = {}
    for gi, label in enumerate(trace.group_labels):
        mask = snap.group_idx == gi
        var[label] = ((snap.x[mask] - snap.theta[mask]).var())
    print(f"  {s:>7} | {stats['G2'].mean:+.4f}          | {var['G2']:.4f} "
          f"| {stats['G1'].mean:+.4f}          | {var['G1']:.4f}")

print("\nthe click-ratio update averages away both the systematic offset "
      "and the initial observation noise")
