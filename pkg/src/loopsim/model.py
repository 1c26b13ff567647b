"""Online logistic regression on the scalar click-rate feature.

The predictor is a two-parameter sigmoid fitted by full-batch gradient
descent with halving-on-increase backtracking.  Training groups identical
(x, y) pairs into weighted unique rows, which leaves the loss and its
gradient mathematically unchanged but makes per-step retraining on a
50k-pair dataset cheap: users are re-selected many times, so the number
of distinct feature values grows far slower than the dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergedError

TAG_INITIAL = 0
TAG_SIMULATION = 1

# Accepted GD steps may grow the rate again after earlier halvings; the
# cap keeps a lucky streak from producing absurd jumps.
_LR_GROWTH = 1.05
_LR_CAP = 1e3
# Early-stop when the gradient norm is this small: the optimum is then
# located to ~1e-6 in parameter space, far inside every tolerance used
# downstream, and cold refits stop wasting passes on flat tail epochs.
_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class LogisticModel:
    weight: float
    bias: float

    def __post_init__(self):
        if not (math.isfinite(self.weight) and math.isfinite(self.bias)):
            raise TrainingDivergedError(
                f"non-finite model parameters ({self.weight!r}, {self.bias!r})")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults match the simulation presets."""

    learning_rate: float = 1.0
    epochs_initial: int = 1500
    steps_per_retrain: int = 5
    l2: float = 1e-4
    retrain_cadence: int = 1
    cold_refit_cadence: int = 1000
    test_fraction: float = 0.0

    def validate(self) -> None:
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be finite and > 0, got {self.learning_rate!r}")
        if self.epochs_initial < 1:
            raise ValueError("epochs_initial must be >= 1")
        if self.steps_per_retrain < 1:
            raise ValueError("steps_per_retrain must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")
        if self.retrain_cadence < 1:
            raise ValueError("retrain_cadence must be >= 1")
        if self.cold_refit_cadence < 0:
            raise ValueError("cold_refit_cadence must be >= 0 (0 disables)")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class EvalMetrics:
    log_loss: float
    accuracy: float
    group_mean_error: dict[str, float]


class Dataset:
    """Append-only store of (x, y) pairs with provenance tags.

    Arrays grow by doubling; existing entries are never mutated, so any
    prefix view taken before an append stays valid and bit-identical.
    """

    def __init__(self, capacity: int = 1024):
        self._x = np.empty(capacity, dtype=np.float64)
        self._y = np.empty(capacity, dtype=np.int8)
        self._group = np.empty(capacity, dtype=np.int64)
        self._step = np.empty(capacity, dtype=np.int64)
        self._tag = np.empty(capacity, dtype=np.int8)
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def _grow(self) -> None:
        cap = max(2 * len(self._x), 1024)
        for name in ("_x", "_y", "_group", "_step", "_tag"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def append(self, x: float, y: int, group: int = 0, step: int = -1,
               tag: int = TAG_SIMULATION) -> None:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"feature outside [0, 1]: {x!r}")
        if y not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {y!r}")
        if self._n == len(self._x):
            self._grow()
        i = self._n
        self._x[i] = x
        self._y[i] = y
        self._group[i] = group
        self._step[i] = step
        self._tag[i] = tag
        self._n = i + 1

    @property
    def x(self) -> np.ndarray:
        return self._x[: self._n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self._n]

    @property
    def group(self) -> np.ndarray:
        return self._group[: self._n]

    @property
    def step(self) -> np.ndarray:
        return self._step[: self._n]

    @property
    def tag(self) -> np.ndarray:
        return self._tag[: self._n]

    def subset(self, indices: np.ndarray) -> "Dataset":
        out = Dataset(capacity=max(len(indices), 1))
        out._x[: len(indices)] = self._x[indices]
        out._y[: len(indices)] = self._y[indices]
        out._group[: len(indices)] = self._group[indices]
        out._step[: len(indices)] = self._step[indices]
        out._tag[: len(indices)] = self._tag[indices]
        out._n = len(indices)
        return out


# Saturated sigmoids are nudged to the nearest representable value inside
# (0, 1); beyond |z| ~ 37 the rounded sigmoid would otherwise be exactly 0
# or 1.
_BELOW_ONE = math.nextafter(1.0, 0.0)
_ABOVE_ZERO = math.nextafter(0.0, 1.0)


def predict(model: LogisticModel, x: float) -> float:
    """Sigmoid response; strictly inside (0, 1)."""
    z = model.weight * x + model.bias
    if z >= 0:
        e = math.exp(-z)
        p = 1.0 - e / (1.0 + e)
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    return min(max(p, _ABOVE_ZERO), _BELOW_ONE)


def predict_array(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    """Vectorized predict with the same branch structure."""
    z = model.weight * np.asarray(x, dtype=np.float64) + model.bias
    e = np.exp(-np.abs(z))
    frac = e / (1.0 + e)
    return np.clip(np.where(z >= 0, 1.0 - frac, frac), _ABOVE_ZERO, _BELOW_ONE)


def decide(y_hat: float, threshold: float) -> int:
    """Threshold rule with strict inequality: 1 iff y_hat > threshold."""
    return 1 if y_hat > threshold else 0


def _make_work(m: int) -> dict:
    return {"z": np.empty(m), "e": np.empty(m), "acc": np.empty(m),
            "tmp": np.empty(m), "mask": np.empty(m, dtype=bool)}


def _weighted_loss_grad(xu, c1, c0, ct, n, w, b, l2, work=None):
    """Loss and gradient of mean regularized log-loss on weighted rows.

    c1/c0/ct count positive/negative/all labels at each unique x; n is the
    total pair count.  The exp(-|z|) formulation is overflow-safe.  All
    intermediates live in ``work`` buffers: the per-step retraining path
    reuses them, which is what keeps a 50k-step run cheap.
    """
    m = len(xu)
    if work is None:
        work = _make_work(m)
    z = work["z"][:m]
    e = work["e"][:m]
    acc = work["acc"][:m]
    tmp = work["tmp"][:m]
    mask = work["mask"][:m]

    np.multiply(xu, w, out=z)
    z += b
    np.greater_equal(z, 0.0, out=mask)
    np.abs(z, out=e)
    np.negative(e, out=e)
    np.exp(e, out=e)                      # e = exp(-|z|)
    np.log1p(e, out=acc)
    np.maximum(z, 0.0, out=tmp)
    acc += tmp                            # acc = log1p(e) + max(z, 0)
    loss = (float(np.dot(ct, acc)) - float(np.dot(c1, z))) / n \
        + 0.5 * l2 * w * w
    np.add(e, 1.0, out=tmp)
    np.divide(e, tmp, out=tmp)            # tmp = e / (1 + e)
    np.subtract(1.0, tmp, out=acc)
    np.copyto(tmp, acc, where=mask)       # tmp = sigmoid(z)
    np.multiply(tmp, ct, out=tmp)
    np.subtract(tmp, c1, out=tmp)         # tmp = residual
    gw = float(np.dot(tmp, xu)) / n + l2 * w
    gb = float(tmp.sum()) / n
    return loss, gw, gb


def _descend(xu, c1, c0, n, w, b, lr, epochs, l2, loss_history=None,
             ct=None, work=None):
    """Gradient descent with halving-on-increase backtracking.

    Each epoch evaluates loss and gradient in one pass.  A step that
    raised the loss is rolled back before it can count as accepted, the
    rate is halved, and the step is retaken from the stored gradient; a
    final validation pass protects the last step.  The accepted-loss
    sequence is therefore non-increasing.
    """
    if ct is None:
        ct = c1 + c0
    loss_prev, gw_prev, gb_prev = _weighted_loss_grad(xu, c1, c0, ct, n, w, b,
                                                      l2, work)
    if not math.isfinite(loss_prev):
        raise TrainingDivergedError(f"non-finite loss at start of descent (w={w}, b={b})")
    if loss_history is not None:
        loss_history.append(loss_prev)
    w_prev, b_prev = w, b
    w, b = w - lr * gw_prev, b - lr * gb_prev
    for _ in range(epochs - 1):
        loss, gw, gb = _weighted_loss_grad(xu, c1, c0, ct, n, w, b, l2, work)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"training diverged (w={w}, b={b})")
        if loss > loss_prev:
            w, b = w_prev, b_prev
            lr *= 0.5
            gw, gb = gw_prev, gb_prev
        else:
            loss_prev, gw_prev, gb_prev = loss, gw, gb
            w_prev, b_prev = w, b
            if loss_history is not None:
                loss_history.append(loss)
            lr = min(lr * _LR_GROWTH, _LR_CAP)
            if gw * gw + gb * gb < _GRAD_TOL * _GRAD_TOL:
                return w, b, lr
        w, b = w - lr * gw, b - lr * gb
    loss, _, _ = _weighted_loss_grad(xu, c1, c0, ct, n, w, b, l2, work)
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"training diverged (w={w}, b={b})")
    if loss > loss_prev:
        w, b = w_prev, b_prev
    elif loss_history is not None:
        loss_history.append(loss)
    return w, b, lr


class WeightedTrainer:
    """Incremental trainer over the weighted unique-row view of a Dataset.

    The engine appends one pair per step and runs a few warm-start epochs;
    periodically it refits cold from the origin as a drift guard.  All
    arithmetic matches ``fit`` exactly because both share ``_descend``.
    """

    def __init__(self, config: TrainConfig):
        self.config = config
        self._index: dict[float, int] = {}
        cap = 4096
        self._xu = np.empty(cap, dtype=np.float64)
        self._c1 = np.zeros(cap, dtype=np.float64)
        self._c0 = np.zeros(cap, dtype=np.float64)
        self._ct = np.zeros(cap, dtype=np.float64)
        self._work = _make_work(cap)
        self._m = 0
        self._n = 0
        self.weight = 0.0
        self.bias = 0.0
        self._lr = config.learning_rate

    @classmethod
    def from_dataset(cls, dataset: Dataset, config: TrainConfig) -> "WeightedTrainer":
        tr = cls(config)
        y = dataset.y
        for i, x in enumerate(dataset.x):
            tr.append(float(x), int(y[i]))
        return tr

    @property
    def n_pairs(self) -> int:
        return self._n

    @property
    def n_unique(self) -> int:
        return self._m

    def append(self, x: float, y: int) -> None:
        j = self._index.get(x)
        if j is None:
            if self._m == len(self._xu):
                cap = 2 * self._m
                for name in ("_xu", "_c1", "_c0", "_ct"):
                    old = getattr(self, name)
                    new = np.empty(cap, dtype=old.dtype)
                    new[: self._m] = old[: self._m]
                    if name != "_xu":
                        new[self._m:] = 0.0
                    setattr(self, name, new)
                self._work = _make_work(cap)
            j = self._m
            self._index[x] = j
            self._xu[j] = x
            self._c1[j] = 0.0
            self._c0[j] = 0.0
            self._ct[j] = 0.0
            self._m += 1
        if y:
            self._c1[j] += 1.0
        else:
            self._c0[j] += 1.0
        self._ct[j] += 1.0
        self._n += 1

    def _rows(self):
        m = self._m
        return self._xu[:m], self._c1[:m], self._c0[:m], self._ct[:m]

    def warm_train(self) -> None:
        xu, c1, c0, ct = self._rows()
        self.weight, self.bias, self._lr = _descend(
            xu, c1, c0, self._n, self.weight, self.bias, self._lr,
            self.config.steps_per_retrain, self.config.l2,
            ct=ct, work=self._work)

    def cold_fit(self) -> tuple[float, float]:
        """Refit from the origin at the full epoch budget; state untouched."""
        xu, c1, c0, ct = self._rows()
        w, b, _ = _descend(xu, c1, c0, self._n, 0.0, 0.0,
                           self.config.learning_rate,
                           self.config.epochs_initial, self.config.l2,
                           ct=ct, work=self._work)
        return w, b

    def adopt(self, w: float, b: float) -> None:
        self.weight, self.bias = w, b

    def model(self) -> LogisticModel:
        return LogisticModel(self.weight, self.bias)


def loss_and_gradient(model: LogisticModel, dataset: Dataset,
                      l2: float = 0.0) -> tuple[float, float, float]:
    """Mean regularized log-loss and its exact analytic gradient."""
    if len(dataset) == 0:
        raise ValueError("loss_and_gradient needs a non-empty dataset")
    x = dataset.x
    y = dataset.y.astype(np.float64)
    return _weighted_loss_grad(x, y, 1.0 - y, np.ones_like(y), len(dataset),
                               model.weight, model.bias, l2)


def fit(dataset: Dataset, config: TrainConfig,
        warm_start: LogisticModel | None = None,
        epochs: int | None = None,
        loss_history: list[float] | None = None) -> LogisticModel:
    """Full-batch gradient descent on the dataset's log-loss.

    Starts from ``warm_start`` or from the origin.  ``epochs`` defaults to
    the initial budget on cold fits and to the per-retrain step count on
    warm ones.
    """
    if len(dataset) == 0:
        raise ValueError("fit needs a non-empty dataset")
    if epochs is None:
        epochs = config.epochs_initial if warm_start is None else config.steps_per_retrain
    w0, b0 = (warm_start.weight, warm_start.bias) if warm_start else (0.0, 0.0)
    tr = WeightedTrainer.from_dataset(dataset, config)
    xu, c1, c0, ct = tr._rows()
    w, b, _ = _descend(xu, c1, c0, len(dataset), w0, b0,
                       config.learning_rate, epochs, config.l2, loss_history,
                       ct=ct, work=tr._work)
    return LogisticModel(w, b)


def split(dataset: Dataset, test_fraction: float,
          rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    """Disjoint train/test partition via a seeded permutation.

    Test size is ceil(n * fraction); both subsets keep original order.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    n = len(dataset)
    n_test = math.ceil(n * test_fraction)
    perm = rng.permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)


def evaluate(model: LogisticModel, test: Dataset,
             group_labels: list[str] | None = None,
             threshold: float = 0.5) -> EvalMetrics:
    """Log-loss, accuracy at the threshold, and per-group mean (y_hat - y)."""
    if len(test) == 0:
        raise ValueError("evaluate needs a non-empty test set")
    x = test.x
    y = test.y.astype(np.float64)
    z = model.weight * x + model.bias
    e = np.exp(-np.abs(z))
    y_hat = predict_array(model, x)
    log_loss = float(np.mean(np.log1p(e) + np.maximum(z, 0.0) - y * z))
    accuracy = float(np.mean((y_hat > threshold).astype(np.float64) == y))
    errors: dict[str, float] = {}
    groups = test.group
    for gi in np.unique(groups):
        mask = groups == gi
        label = group_labels[gi] if group_labels else str(int(gi))
        errors[label] = float(np.mean(y_hat[mask] - y[mask]))
    return EvalMetrics(log_loss=log_loss, accuracy=accuracy, group_mean_error=errors)
