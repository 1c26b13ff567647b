"""Individual feedback loop: recommendations reshape interest itself.

Each decision nudges the selected user's latent interest toward the
decision (convex combination with weight alpha).  Users above the model's
threshold get pushed to full interest, users below drift to none, and the
between-group gap widens monotonically: historical bias, amplified by the
loop rather than by any measurement artifact.
"""

import dataclasses

from loopsim import preset, run

config = preset("individual")
config = dataclasses.replace(
    config,
    sizes={"G1": 100, "G2": 100},
    groups={label: dataclasses.replace(params, n_train=150)
            for label, params in config.groups.items()},
    total_steps=10_000,
    checkpoints=(0, 1000, 3000, 10_000),
)

trace = run(config, seed=3)

print("checkpoint | mean theta G1 | mean theta G2 | gap")
for s in config.checkpoints:
    snap = trace.checkpoint(s)
    g1 = snap.theta[snap.group_idx == 0].mean()
    g2 = snap.theta[snap.group_idx == 1].mean()
    print(f"  {s:>7} | {g1:.3f}         | {g2:.3f}         | {g1 - g2:.3f}")

hi = trace.initial_members.theta > 0.5
final = trace.final_members.theta
print(f"\nusers starting above 0.5 end at mean theta {final[hi].mean():.3f}; "
      f"users starting below end at {final[~hi].mean():.3f}")
print("interests polarize toward the fixed points 1 and 0 of the "
      "convex-combination update")
