"""Platform users: who they are, what is measured, and what they click.

A user carries a latent interest ``theta`` in the single recommendable
item and an observable feature ``x`` (the historical click rate the
platform can see).  Groups differ only through their parameter sets.
Interest draws use rejection-sampled truncated normals so the initial
distributions carry no boundary spikes; feature measurement is additive
noise clamped to [0, 1]; click probabilities are truncated-normal
perturbations of theta; clicks are Bernoulli realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAX_REJECTION_ATTEMPTS = 1000


@dataclass(frozen=True)
class GroupParams:
    """Distribution parameters of one user group.

    The ``*_train`` fields govern the synthetic warm-start training set
    only; the plain ``mu_t``/``sigma_t`` govern outcome realization during
    the simulation itself.
    """

    mu_theta: float
    sigma_theta: float
    mu_r: float = 0.0
    sigma_r: float = 0.0
    mu_t: float = 0.0
    sigma_t: float = 0.0
    n_train: int = 0
    mu_t_train: float = 0.0
    sigma_t_train: float = 0.0

    def validate(self, label: str = "") -> None:
        where = f" for group {label}" if label else ""
        for name in ("mu_theta", "sigma_theta", "mu_r", "sigma_r",
                     "mu_t", "sigma_t", "mu_t_train", "sigma_t_train"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigurationError(f"{name}{where} must be finite, got {v!r}")
        for name in ("sigma_theta", "sigma_r", "sigma_t", "sigma_t_train"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name}{where} must be >= 0")
        if self.n_train < 0:
            raise ConfigurationError(f"n_train{where} must be >= 0")


@dataclass
class Individual:
    """One platform user (value-level view of a Population slot)."""

    id: int
    group: str
    theta: float
    x: float
    recommended_count: int = 0
    clicked_count: int = 0
    observed_count: int = 0
    observed_clicks: int = 0


def draw_truncated_normal(mu: float, sigma: float, lo: float, hi: float,
                          rng: np.random.Generator) -> float:
    """Sample normal(mu, sigma) conditioned on [lo, hi] by rejection.

    sigma == 0 degenerates to clamp(mu).  Rejection is capped so that
    pathological parameters fail loudly instead of spinning forever.
    """
    if not (math.isfinite(mu) and math.isfinite(sigma)):
        raise ConfigurationError(f"non-finite truncated-normal params mu={mu!r} sigma={sigma!r}")
    if sigma < 0:
        raise ConfigurationError(f"sigma must be >= 0, got {sigma}")
    if not lo < hi:
        raise ConfigurationError(f"need lo < hi, got [{lo}, {hi}]")
    if sigma == 0.0:
        return min(max(mu, lo), hi)
    for _ in range(MAX_REJECTION_ATTEMPTS):
        v = mu + sigma * rng.standard_normal()
        if lo <= v <= hi:
            return v
    raise ConfigurationError(
        f"truncated normal at mu={mu} sigma={sigma} on [{lo}, {hi}] rejected "
        f"{MAX_REJECTION_ATTEMPTS} consecutive draws")


def realize_feature(theta: float, params: GroupParams,
                    rng: np.random.Generator) -> float:
    """Observe theta through the measurement channel: clamp(theta + eps).

    eps ~ normal(mu_r, sigma_r); a zero sigma_r consumes no draw, so noise
    free configurations leave the stream untouched.
    """
    if sigma := params.sigma_r:
        eps = rng.normal(params.mu_r, sigma)
    else:
        eps = params.mu_r
    return min(max(theta + eps, 0.0), 1.0)


def click_probability(theta: float, params: GroupParams,
                      rng: np.random.Generator, *,
                      train: bool = False) -> float:
    """Realize the click probability for a user with interest theta.

    The probability is a truncated normal centred at theta + mu_t with
    spread sigma_t, conditioned on [0, 1].  Truncation (rather than
    clamping) keeps the noisy-label regime genuinely uninformative: at
    sigma near 1 the conditional mean of the draw is almost flat in
    theta, so a model trained on such labels predicts the base rate
    everywhere.  With ``train=True`` the warm-start parameters
    (mu_t_train, sigma_t_train) are used instead.
    """
    if train:
        mu, sigma = params.mu_t_train, params.sigma_t_train
    else:
        mu, sigma = params.mu_t, params.sigma_t
    return draw_truncated_normal(theta + mu, sigma, 0.0, 1.0, rng)


def realize_outcome(p: float, rng: np.random.Generator) -> int:
    """Bernoulli click with success probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"click probability left [0, 1]: {p!r}")
    return 1 if rng.random() < p else 0


class Population:
    """The active user set, array-backed for cheap per-step access.

    Total cardinality is fixed for the lifetime of a run: users leave
    only by being replaced in place.  Group labels index into ``labels``;
    the engine works on the arrays directly, while ``individual`` gives a
    value-level view for callers that want one user at a time.
    """

    def __init__(self, labels: list[str], group_params: dict[str, GroupParams]):
        self.labels = list(labels)
        self.group_params = dict(group_params)
        self.ids = np.empty(0, dtype=np.int64)
        self.group_idx = np.empty(0, dtype=np.int64)
        self.theta = np.empty(0, dtype=np.float64)
        self.x = np.empty(0, dtype=np.float64)
        self.recommended = np.empty(0, dtype=np.int64)
        self.clicked = np.empty(0, dtype=np.int64)
        self.observed = np.empty(0, dtype=np.int64)
        self.observed_clicks = np.empty(0, dtype=np.int64)
        self._next_id = 0

    @property
    def size(self) -> int:
        return len(self.ids)

    def group_counts(self) -> dict[str, int]:
        counts = np.bincount(self.group_idx, minlength=len(self.labels))
        return {lab: int(c) for lab, c in zip(self.labels, counts)}

    def counts_array(self) -> np.ndarray:
        return np.bincount(self.group_idx, minlength=len(self.labels))

    def individual(self, i: int) -> Individual:
        return Individual(
            id=int(self.ids[i]),
            group=self.labels[int(self.group_idx[i])],
            theta=float(self.theta[i]),
            x=float(self.x[i]),
            recommended_count=int(self.recommended[i]),
            clicked_count=int(self.clicked[i]),
            observed_count=int(self.observed[i]),
            observed_clicks=int(self.observed_clicks[i]),
        )

    def new_member_fields(self, group_i: int, theta_rng: np.random.Generator,
                          feature_rng: np.random.Generator) -> tuple[int, float, float]:
        """Draw (id, theta, x) for a fresh member of the given group."""
        params = self.group_params[self.labels[group_i]]
        theta = draw_truncated_normal(params.mu_theta, params.sigma_theta, 0.0, 1.0, theta_rng)
        x = realize_feature(theta, params, feature_rng)
        uid = self._next_id
        self._next_id += 1
        return uid, theta, x

    def replace(self, i: int, group_i: int, theta_rng: np.random.Generator,
                feature_rng: np.random.Generator) -> None:
        """Swap out member i for a fresh draw from group_i, in place."""
        uid, theta, x = self.new_member_fields(group_i, theta_rng, feature_rng)
        self.ids[i] = uid
        self.group_idx[i] = group_i
        self.theta[i] = theta
        self.x[i] = x
        self.recommended[i] = 0
        self.clicked[i] = 0
        self.observed[i] = 0
        self.observed_clicks[i] = 0

    def check_invariants(self) -> None:
        assert np.all((self.theta >= 0) & (self.theta <= 1)), "theta left [0, 1]"
        assert np.all((self.x >= 0) & (self.x <= 1)), "x left [0, 1]"
        assert np.all(self.clicked <= self.recommended), "clicked > recommended"


def init_population(groups: dict[str, GroupParams], sizes: dict[str, int],
                    rng: np.random.Generator,
                    feature_rng: np.random.Generator | None = None) -> Population:
    """Create the initial user set.

    Interest draws come from ``rng``; measurement noise for the initial x
    comes from ``feature_rng`` (defaulting to the same stream).  Group
    order follows the order of ``groups``.
    """
    if not groups:
        raise ConfigurationError("at least one group must be configured")
    if set(sizes) != set(groups):
        raise ConfigurationError(f"sizes {sorted(sizes)} do not match groups {sorted(groups)}")
    for label, params in groups.items():
        params.validate(label)
        if sizes[label] <= 0:
            raise ConfigurationError(f"size for group {label} must be positive")
    if feature_rng is None:
        feature_rng = rng

    pop = Population(list(groups), groups)
    total = sum(sizes.values())
    pop.ids = np.arange(total, dtype=np.int64)
    pop._next_id = total
    pop.group_idx = np.empty(total, dtype=np.int64)
    pop.theta = np.empty(total, dtype=np.float64)
    pop.x = np.empty(total, dtype=np.float64)
    pop.recommended = np.zeros(total, dtype=np.int64)
    pop.clicked = np.zeros(total, dtype=np.int64)
    pop.observed = np.zeros(total, dtype=np.int64)
    pop.observed_clicks = np.zeros(total, dtype=np.int64)

    i = 0
    for gi, (label, params) in enumerate(groups.items()):
        for _ in range(sizes[label]):
            pop.group_idx[i] = gi
            pop.theta[i] = draw_truncated_normal(
                params.mu_theta, params.sigma_theta, 0.0, 1.0, rng)
            pop.x[i] = realize_feature(pop.theta[i], params, feature_rng)
            i += 1
    return pop
