"""The five case-study experiments plus the open-loop baseline.

Initial conditions shared by every experiment: 1000 users split 496/504,
500 warm-start pairs per group, interest spread 0.15 per group, outcome
noise 0.1 during the simulation, unbiased feature and outcome channels
for group 1, and an unbiased training-time outcome channel.  Experiments
differ only in the fields listed per preset below.
"""

from __future__ import annotations

from .engine import SimulationConfig
from .feedback import FeedbackConfig
from .model import TrainConfig
from .population import GroupParams

PRESET_NAMES = ("sampling", "individual", "feature", "ml_model", "outcome",
                "open_loop")


def _groups(mu_g1: float, mu_g2: float, sigma_r: float, mu_r_g2: float,
            sigma_t_train: float) -> dict[str, GroupParams]:
    shared = dict(sigma_theta=0.15, mu_t=0.0, sigma_t=0.1, n_train=500,
                  mu_t_train=0.0, sigma_t_train=sigma_t_train)
    return {
        "G1": GroupParams(mu_theta=mu_g1, mu_r=0.0, sigma_r=sigma_r, **shared),
        "G2": GroupParams(mu_theta=mu_g2, mu_r=mu_r_g2, sigma_r=sigma_r, **shared),
    }


_SIZES = {"G1": 496, "G2": 504}


def preset(name: str, seed: int = 0) -> SimulationConfig:
    """Fully populated config for a named experiment."""
    if name in ("sampling", "individual", "outcome", "open_loop"):
        groups = _groups(0.7, 0.3, sigma_r=0.0, mu_r_g2=0.0, sigma_t_train=0.0)
    elif name == "ml_model":
        groups = _groups(0.7, 0.3, sigma_r=0.0, mu_r_g2=0.0, sigma_t_train=1.0)
    elif name == "feature":
        groups = _groups(0.5, 0.5, sigma_r=0.1, mu_r_g2=-0.2, sigma_t_train=0.0)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")

    if name == "sampling":
        feedback = FeedbackConfig(sampling_enabled=True)
    elif name == "individual":
        feedback = FeedbackConfig(individual_enabled=True, alpha=0.05)
    elif name == "feature":
        # Lifetime click-ratio over every interaction: the ratio's 1/k
        # averaging is what shrinks the measurement-error variance, and
        # observing every interaction is what lets systematically
        # underestimated users ever be corrected.
        feedback = FeedbackConfig(feature_enabled=True, beta=0.1,
                                  feature_update="click_ratio",
                                  feature_observe="all")
    elif name == "ml_model":
        feedback = FeedbackConfig(ml_model_enabled=True)
    elif name == "outcome":
        feedback = FeedbackConfig(outcome_enabled=True, delta=0.2)
    else:
        feedback = FeedbackConfig()

    return SimulationConfig(
        groups=groups,
        sizes=dict(_SIZES),
        feedback=feedback,
        train=TrainConfig(),
        threshold=0.5,
        total_steps=50_000,
        checkpoints=(0, 2000, 10_000, 20_000, 50_000),
        seed=seed,
    )
