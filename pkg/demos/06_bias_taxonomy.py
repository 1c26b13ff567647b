"""Which bias does each feedback loop affect?

The mapping is static: sampling and ml-model loops act on who is sampled
or whose outcomes are observed (representation bias); the individual loop
rewrites the construct itself (historical bias); feature and outcome loops
distort the measured proxies (measurement bias).  Annotations of composed
loops are unions, so adding a loop never removes a bias kind.
"""

from loopsim import FeedbackConfig, bias_annotation

LOOPS = ("sampling", "individual", "feature", "ml_model", "outcome")


def config_with(loops):
    return FeedbackConfig(**{f"{loop}_enabled": True for loop in loops})


print("single loops:")
for loop in LOOPS:
    kinds = sorted(k.value for k in bias_annotation(config_with([loop])))
    print(f"  {loop:<11} -> {', '.join(kinds)}")

print("\nsome compositions:")
for loops in (("sampling", "outcome"), ("individual", "feature"),
              ("sampling", "individual", "feature", "ml_model", "outcome")):
    kinds = sorted(k.value for k in bias_annotation(config_with(loops)))
    print(f"  {' + '.join(loops):<45} -> {', '.join(kinds)}")

print("\nwith a held-out evaluation split, the ml-model loop additionally "
      "contaminates evaluation:")
fb = FeedbackConfig(ml_model_enabled=True)
for frac in (0.0, 0.2):
    kinds = sorted(k.value for k in bias_annotation(fb, test_fraction=frac))
    print(f"  test_fraction={frac}: {', '.join(kinds)}")
