"""Closed-loop driver: select, predict, decide, realize, feed back, retrain.

A run is strictly sequential and owns all of its mutable state; given the
same config and seed it reproduces its Trace bit for bit.  One user
interacts per time-step.  The fixed order inside a step is part of the
reproducibility contract:

    1. select one active user uniformly at random
    2. predict from the user's observable feature
    3. threshold decision
    4. click probability (outcome shift applied here when that loop is on)
    5. Bernoulli outcome
    6. dataset append, unless gated off by the ml-model loop
    7. individual-loop interest update
    8. feature-loop feature update
    9. sampling-loop replacement
   10. retraining on the configured cadence (cold refit as drift guard)
   11. bookkeeping: event record, per-step series, checkpoint snapshots
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .feedback import (FeedbackConfig, apply_feature_feedback,
                       apply_individual_feedback, apply_sampling_feedback,
                       gate_dataset_append, shifted_click_probability)
from .model import (Dataset, EvalMetrics, LogisticModel, TrainConfig,
                    WeightedTrainer, TAG_INITIAL, TAG_SIMULATION, decide,
                    evaluate, predict, predict_array)
from .population import (GroupParams, Population, click_probability,
                         init_population, realize_feature, realize_outcome)
from .rng import RandomStreams

DEFAULT_CHECKPOINTS = (0, 2000, 10000, 20000, 50000)


@dataclass(frozen=True)
class SimulationConfig:
    groups: dict[str, GroupParams]
    sizes: dict[str, int]
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: float = 0.5
    total_steps: int = 50_000
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    seed: int = 0

    def validate(self) -> None:
        if not self.groups:
            raise ConfigurationError("at least one group must be configured")
        if set(self.sizes) != set(self.groups):
            raise ConfigurationError("sizes and groups must list the same labels")
        for label, params in self.groups.items():
            params.validate(label)
            if self.sizes[label] <= 0:
                raise ConfigurationError(f"size for group {label} must be positive")
        self.feedback.validate()
        self.train.validate()
        if not math.isfinite(self.threshold):
            raise ConfigurationError("threshold must be finite")
        if self.total_steps < 1:
            raise ConfigurationError("total_steps must be >= 1")
        cps = self.checkpoints
        if list(cps) != sorted(set(cps)):
            raise ConfigurationError("checkpoints must be sorted and unique")
        if cps and (cps[0] < 0 or cps[-1] > self.total_steps):
            raise ConfigurationError("checkpoints must lie in [0, total_steps]")
        if all(p.n_train == 0 for p in self.groups.values()):
            raise ConfigurationError("at least one group needs n_train >= 1")


@dataclass
class MemberSnapshot:
    """Per-member state frozen at one instant."""

    ids: np.ndarray
    group_idx: np.ndarray
    theta: np.ndarray
    x: np.ndarray


@dataclass
class CheckpointSnapshot:
    """Raw per-member state at a checkpoint; statistics derive from this."""

    step: int
    model: LogisticModel
    dataset_size: int
    ids: np.ndarray
    group_idx: np.ndarray
    theta: np.ndarray
    x: np.ndarray
    y_hat: np.ndarray
    eval_metrics: EvalMetrics | None = None


@dataclass
class ColdRefitRecord:
    step: int
    weight_warm: float
    bias_warm: float
    weight_cold: float
    bias_cold: float


class EventLog:
    """Per-step event records, one row per simulation step."""

    COLUMNS = ("step", "user_id", "group", "theta", "x", "y_hat",
               "d", "p", "y", "dataset_size")

    def __init__(self, total_steps: int):
        self.step = np.arange(1, total_steps + 1, dtype=np.int64)
        self.user_id = np.empty(total_steps, dtype=np.int64)
        self.group_idx = np.empty(total_steps, dtype=np.int64)
        self.theta = np.empty(total_steps, dtype=np.float64)
        self.x = np.empty(total_steps, dtype=np.float64)
        self.y_hat = np.empty(total_steps, dtype=np.float64)
        self.d = np.empty(total_steps, dtype=np.int8)
        self.p = np.empty(total_steps, dtype=np.float64)
        self.y = np.empty(total_steps, dtype=np.int8)
        self.dataset_size = np.empty(total_steps, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.step)


@dataclass
class Trace:
    """Everything a run produced, sufficient to recompute any statistic."""

    seed: int
    group_labels: list[str]
    events: EventLog
    series_counts: np.ndarray        # (steps, groups) population counts after each step
    series_mean_yhat: np.ndarray     # (steps, groups) population mean prediction
    series_mean_theta: np.ndarray    # (steps, groups) population mean interest
    checkpoints: list[CheckpointSnapshot]
    cold_refits: list[ColdRefitRecord]
    initial_members: MemberSnapshot
    final_members: MemberSnapshot
    config: SimulationConfig

    def checkpoint(self, step: int) -> CheckpointSnapshot:
        for snap in self.checkpoints:
            if snap.step == step:
                return snap
        raise KeyError(f"no checkpoint at step {step}")

    @property
    def checkpoint_steps(self) -> list[int]:
        return [snap.step for snap in self.checkpoints]


@dataclass
class SimulationState:
    step: int
    population: Population
    dataset: Dataset
    trainer: WeightedTrainer
    streams: RandomStreams
    test_dataset: Dataset | None = None

    @property
    def model(self) -> LogisticModel:
        return self.trainer.model()

    def admit_pair(self, x: float, y: int, group: int, step: int, tag: int,
                   test_fraction: float) -> None:
        """Route a pair to the training data or the held-out sample.

        With a positive test fraction each pair is assigned at append time
        from the split stream (a streaming version of the train/test
        partition); held-out pairs never reach the trainer.  A zero
        fraction consumes no draws, so the default configs leave the
        split stream untouched.
        """
        if test_fraction > 0 and self.streams.split.random() < test_fraction:
            self.test_dataset.append(x, y, group=group, step=step, tag=tag)
        else:
            self.dataset.append(x, y, group=group, step=step, tag=tag)
            self.trainer.append(x, y)


def build_initial_training_set(config: SimulationConfig,
                               rng: np.random.Generator) -> Dataset:
    """Synthesize the warm-start sample, n_train pairs per group.

    Each pair draws a latent interest from the group's distribution,
    observes it through the feature channel, and realizes a label through
    the training-time outcome channel (mu_t_train, sigma_t_train).
    """
    if all(p.n_train == 0 for p in config.groups.values()):
        raise ConfigurationError("at least one group needs n_train >= 1")
    from .population import draw_truncated_normal

    dataset = Dataset(capacity=sum(p.n_train for p in config.groups.values())
                      + config.total_steps + 1)
    for gi, (label, params) in enumerate(config.groups.items()):
        for _ in range(params.n_train):
            theta = draw_truncated_normal(params.mu_theta, params.sigma_theta,
                                          0.0, 1.0, rng)
            x = realize_feature(theta, params, rng)
            p = click_probability(theta, params, rng, train=True)
            y = realize_outcome(p, rng)
            dataset.append(x, y, group=gi, step=-1, tag=TAG_INITIAL)
    return dataset


def step(state: SimulationState, config: SimulationConfig) -> tuple:
    """Advance the simulation one interaction; returns the event row.

    Mutates population, dataset, trainer, and stream states in the fixed
    order documented at module level.
    """
    pop = state.population
    fb = config.feedback
    streams = state.streams
    t = state.step + 1

    i = int(streams.user_selection.integers(0, pop.size))
    user_id = int(pop.ids[i])
    group_i = int(pop.group_idx[i])
    theta = float(pop.theta[i])
    x = float(pop.x[i])
    params = pop.group_params[pop.labels[group_i]]

    y_hat = predict(state.trainer.model(), x)
    d = decide(y_hat, config.threshold)

    p = click_probability(theta, params, streams.outcome)
    if fb.outcome_enabled:
        p = shifted_click_probability(p, d, fb.delta)
    y = realize_outcome(p, streams.outcome)

    if gate_dataset_append(d, fb.ml_model_enabled):
        state.admit_pair(x, y, group_i, t, TAG_SIMULATION,
                         config.train.test_fraction)

    pop.observed[i] += 1
    pop.observed_clicks[i] += y
    if d == 1:
        pop.recommended[i] += 1
        pop.clicked[i] += y

    if fb.individual_enabled:
        pop.theta[i] = apply_individual_feedback(theta, d, fb.alpha)

    if fb.feature_enabled:
        observed = (d == 1) if fb.feature_observe == "positive" else True
        if observed:
            if fb.feature_update == "ema":
                pop.x[i] = apply_feature_feedback(x, y, fb.beta)
            elif fb.feature_observe == "positive":
                pop.x[i] = pop.clicked[i] / pop.recommended[i]
            else:
                # running mean of (initial measurement, y_1 .. y_k)
                pop.x[i] = x + (y - x) / (pop.observed[i] + 1.0)

    if fb.sampling_enabled:
        apply_sampling_feedback(pop, i, d, streams.replacement)

    cold_record = None
    if t % config.train.retrain_cadence == 0:
        state.trainer.warm_train()
        cadence = config.train.cold_refit_cadence
        if cadence and t % cadence == 0:
            w_warm, b_warm = state.trainer.weight, state.trainer.bias
            w_cold, b_cold = state.trainer.cold_fit()
            state.trainer.adopt(w_cold, b_cold)
            cold_record = ColdRefitRecord(t, w_warm, b_warm, w_cold, b_cold)

    state.step = t
    return (t, user_id, group_i, theta, x, y_hat, d, p, y,
            len(state.dataset), cold_record)


def _checkpoint_snapshot(state: SimulationState,
                         group_labels: list[str]) -> CheckpointSnapshot:
    pop = state.population
    model = state.trainer.model()
    y_hat = predict_array(model, pop.x)
    eval_metrics = None
    if state.test_dataset is not None and len(state.test_dataset) > 0:
        eval_metrics = evaluate(model, state.test_dataset, group_labels)
    return CheckpointSnapshot(
        step=state.step,
        model=model,
        dataset_size=len(state.dataset),
        ids=pop.ids.copy(),
        group_idx=pop.group_idx.copy(),
        theta=pop.theta.copy(),
        x=pop.x.copy(),
        y_hat=y_hat,
        eval_metrics=eval_metrics,
    )


def _member_snapshot(pop: Population) -> MemberSnapshot:
    return MemberSnapshot(ids=pop.ids.copy(), group_idx=pop.group_idx.copy(),
                          theta=pop.theta.copy(), x=pop.x.copy())


def run(config: SimulationConfig, seed: int | None = None) -> Trace:
    """Run the closed loop for total_steps and return the full Trace."""
    config.validate()
    master_seed = config.seed if seed is None else seed
    streams = RandomStreams(master_seed)

    population = init_population(config.groups, config.sizes,
                                 streams.population_init, streams.feature_noise)
    initial = build_initial_training_set(config, streams.training)
    fraction = config.train.test_fraction
    if fraction > 0:
        state = SimulationState(
            step=0, population=population,
            dataset=Dataset(capacity=len(initial) + config.total_steps + 1),
            trainer=WeightedTrainer(config.train), streams=streams,
            test_dataset=Dataset())
        y_init = initial.y
        g_init = initial.group
        for i, x in enumerate(initial.x):
            state.admit_pair(float(x), int(y_init[i]), int(g_init[i]),
                             -1, TAG_INITIAL, fraction)
    else:
        trainer = WeightedTrainer.from_dataset(initial, config.train)
        state = SimulationState(step=0, population=population,
                                dataset=initial, trainer=trainer,
                                streams=streams)
    state.trainer.adopt(*state.trainer.cold_fit())

    n_groups = len(population.labels)
    T = config.total_steps
    events = EventLog(T)
    series_counts = np.empty((T, n_groups), dtype=np.int64)
    series_mean_yhat = np.empty((T, n_groups), dtype=np.float64)
    series_mean_theta = np.empty((T, n_groups), dtype=np.float64)
    checkpoint_set = set(config.checkpoints)
    checkpoints: list[CheckpointSnapshot] = []
    cold_refits: list[ColdRefitRecord] = []

    initial_members = _member_snapshot(population)
    labels = list(population.labels)
    if 0 in checkpoint_set:
        checkpoints.append(_checkpoint_snapshot(state, labels))

    group_idx = population.group_idx
    for t in range(1, T + 1):
        row = step(state, config)
        if row[10] is not None:
            cold_refits.append(row[10])
        k = t - 1
        events.user_id[k] = row[1]
        events.group_idx[k] = row[2]
        events.theta[k] = row[3]
        events.x[k] = row[4]
        events.y_hat[k] = row[5]
        events.d[k] = row[6]
        events.p[k] = row[7]
        events.y[k] = row[8]
        events.dataset_size[k] = row[9]

        counts = np.bincount(group_idx, minlength=n_groups)
        tr_state = state.trainer
        z = tr_state.weight * population.x + tr_state.bias
        e = np.exp(-np.abs(z))
        frac = e / (1.0 + e)
        yh = np.where(z >= 0, 1.0 - frac, frac)
        series_counts[k] = counts
        series_mean_yhat[k] = np.bincount(group_idx, weights=yh,
                                          minlength=n_groups) / counts
        series_mean_theta[k] = np.bincount(group_idx, weights=population.theta,
                                           minlength=n_groups) / counts
        if t in checkpoint_set:
            checkpoints.append(_checkpoint_snapshot(state, labels))

    population.check_invariants()
    return Trace(
        seed=master_seed,
        group_labels=labels,
        events=events,
        series_counts=series_counts,
        series_mean_yhat=series_mean_yhat,
        series_mean_theta=series_mean_theta,
        checkpoints=checkpoints,
        cold_refits=cold_refits,
        initial_members=initial_members,
        final_members=_member_snapshot(population),
        config=config,
    )


def _sliding_extrema(series: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Forward-looking sliding max and min over windows of ``width`` points.

    Output index t covers series[t : t + width]; monotonic-deque, O(n).
    """
    n = len(series)
    m = n - width + 1
    fmax = np.empty(m)
    fmin = np.empty(m)
    qmax: deque[int] = deque()
    qmin: deque[int] = deque()
    for j in range(n):
        while qmax and series[qmax[-1]] <= series[j]:
            qmax.pop()
        qmax.append(j)
        while qmin and series[qmin[-1]] >= series[j]:
            qmin.pop()
        qmin.append(j)
        t = j - width + 1
        if t >= 0:
            if qmax[0] < t:
                qmax.popleft()
            if qmin[0] < t:
                qmin.popleft()
            fmax[t] = series[qmax[0]]
            fmin[t] = series[qmin[0]]
    return fmax, fmin


def detect_equilibrium(series, tolerance: float, window: int) -> int | None:
    """Earliest index t* whose next ``window`` points stay within tolerance.

    Returns the smallest t* with max over s in [t*, t* + window] of
    |series[s] - series[t*]| <= tolerance, or None when no such index
    exists.  The series must be long enough to hold one full window.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if not tolerance > 0:
        raise ValueError("tolerance must be > 0")
    arr = np.asarray(series, dtype=np.float64)
    if len(arr) < window + 1:
        raise ValueError(f"series of length {len(arr)} is shorter than "
                         f"window + 1 = {window + 1}")
    fmax, fmin = _sliding_extrema(arr, window + 1)
    anchors = arr[: len(fmax)]
    ok = (fmax - anchors <= tolerance) & (anchors - fmin <= tolerance)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if len(hits) else None
