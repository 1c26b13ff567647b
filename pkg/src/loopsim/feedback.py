"""The five feedback operators, applied after each decision.

Any subset of loops can be active at once.  Each operator touches exactly
one slice of simulation state: membership (sampling), latent interest
(individual), the observable feature (feature), the training data gate
(ml_model), or the outcome probability (outcome).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .population import Population

FEATURE_UPDATE_MODES = ("ema", "click_ratio")
FEATURE_OBSERVE_MODES = ("positive", "all")


@dataclass(frozen=True)
class FeedbackConfig:
    """Loop switches and their parameters.

    ``feature_update`` selects between the exponential-moving-average
    update and the lifetime click-ratio kept on the user's counters;
    ``feature_observe`` controls whether the feature refreshes only on
    positive decisions or on every interaction.
    """

    sampling_enabled: bool = False
    individual_enabled: bool = False
    alpha: float = 0.05
    feature_enabled: bool = False
    beta: float = 0.1
    feature_update: str = "ema"
    feature_observe: str = "positive"
    ml_model_enabled: bool = False
    outcome_enabled: bool = False
    delta: float = 0.2

    def validate(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1], got {self.beta!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigurationError(f"delta must lie in [0, 1], got {self.delta!r}")
        if self.feature_update not in FEATURE_UPDATE_MODES:
            raise ConfigurationError(
                f"feature_update must be one of {FEATURE_UPDATE_MODES}, got {self.feature_update!r}")
        if self.feature_observe not in FEATURE_OBSERVE_MODES:
            raise ConfigurationError(
                f"feature_observe must be one of {FEATURE_OBSERVE_MODES}, got {self.feature_observe!r}")

    def enabled_loops(self) -> frozenset[str]:
        loops = []
        if self.sampling_enabled:
            loops.append("sampling")
        if self.individual_enabled:
            loops.append("individual")
        if self.feature_enabled:
            loops.append("feature")
        if self.ml_model_enabled:
            loops.append("ml_model")
        if self.outcome_enabled:
            loops.append("outcome")
        return frozenset(loops)


def apply_sampling_feedback(pop: Population, index: int, d: int,
                            rng: np.random.Generator) -> None:
    """Replace the user on a negative decision; keep them on a positive one.

    The replacement's group is drawn with probability proportional to the
    group shares *before* removal (homophily); the new user's interest and
    feature come fresh from the drawn group's distributions.  Population
    size never changes.
    """
    if d == 1:
        return
    counts = pop.counts_array()
    total = counts.sum()
    u = rng.random()
    cum = 0.0
    group_i = len(counts) - 1
    for gi, c in enumerate(counts):
        cum += c / total
        if u < cum:
            group_i = gi
            break
    pop.replace(index, group_i, rng, rng)


def apply_individual_feedback(theta: float, d: int, alpha: float) -> float:
    """Shift interest toward the decision: convex combination with weight alpha."""
    return (1.0 - alpha) * theta + alpha * d


def apply_feature_feedback(x: float, y: int, beta: float) -> float:
    """Exponential-moving-average refresh of the observed click rate."""
    return (1.0 - beta) * x + beta * y


def gate_dataset_append(d: int, ml_model_enabled: bool) -> bool:
    """Whether the step's (x, y) pair enters the training data.

    With the ml-model loop on, outcomes of negative decisions are never
    observed, so the pair is dropped; otherwise every pair is kept.
    """
    return not (ml_model_enabled and d == 0)


def shifted_click_probability(p: float, d: int, delta: float) -> float:
    """Additive outcome shift: +delta on d=1, -delta on d=0, clamped to [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability outside [0, 1]: {p!r}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta outside [0, 1]: {delta!r}")
    return min(max(p + delta * (2 * d - 1), 0.0), 1.0)
