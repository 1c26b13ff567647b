"""Bias measures over traces and the loop-to-bias taxonomy.

All functions are pure over immutable trace snapshots.  Box statistics
follow the Tukey convention: quartiles by linear interpolation between
order statistics at positions (n + 1) * p (the median-exclusive rule),
whiskers at the last data point within 1.5 IQR of the box, and outliers
strictly beyond the whiskers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .engine import Trace
from .feedback import FeedbackConfig


class BiasKind(enum.Enum):
    REPRESENTATION = "representation"
    HISTORICAL = "historical"
    MEASUREMENT = "measurement"
    EVALUATION = "evaluation"


# Sub-nuances are only defined for representation bias.
REPRESENTATION_NUANCES = frozenset(
    {"target-vs-use", "underrepresented-group", "unrepresentative-sample"})

_LOOP_BIAS = {
    "sampling": BiasKind.REPRESENTATION,
    "ml_model": BiasKind.REPRESENTATION,
    "individual": BiasKind.HISTORICAL,
    "feature": BiasKind.MEASUREMENT,
    "outcome": BiasKind.MEASUREMENT,
}

# Families of per-member error values available at every checkpoint.  The
# expected outcome of a member is taken to be theta (noise-free click
# probability with no decision shift), so the two prediction-error
# families coincide numerically; both names stay addressable.
STAT_FAMILIES = ("theta", "x_minus_theta", "yhat_minus_expected_outcome",
                 "yhat_minus_theta")


@dataclass(frozen=True)
class GroupStats:
    group: str
    count: int
    mean: float
    minimum: float
    maximum: float
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]


def quartiles(values: np.ndarray) -> tuple[float, float, float]:
    """Q1, median, Q3 at positions (n + 1) * p, linearly interpolated."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    if n == 0:
        raise ValueError("quartiles of an empty sample")
    out = []
    for p in (0.25, 0.5, 0.75):
        h = (n + 1) * p
        lo = int(np.floor(h))
        if lo < 1:
            out.append(float(v[0]))
        elif lo >= n:
            out.append(float(v[-1]))
        else:
            frac = h - lo
            out.append(float(v[lo - 1] + frac * (v[lo] - v[lo - 1])))
    return out[0], out[1], out[2]


def tukey_stats(values: np.ndarray, group: str) -> GroupStats:
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        raise ValueError(f"no members in group {group}")
    q1, med, q3 = quartiles(v)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    whisker_lo = float(inside.min())
    whisker_hi = float(inside.max())
    outliers = tuple(float(o) for o in np.sort(v[(v < whisker_lo) | (v > whisker_hi)]))
    return GroupStats(group=group, count=len(v), mean=float(v.mean()),
                      minimum=float(v.min()), maximum=float(v.max()),
                      q1=q1, median=med, q3=q3,
                      whisker_lo=whisker_lo, whisker_hi=whisker_hi,
                      outliers=outliers)


def bias_annotation(feedback: FeedbackConfig,
                    test_fraction: float = 0.0) -> frozenset[BiasKind]:
    """Union of the bias kinds affected by the enabled loops.

    The ml-model loop additionally flags evaluation bias, but only when a
    held-out evaluation split exists to be influenced.
    """
    kinds = {_LOOP_BIAS[loop] for loop in feedback.enabled_loops()}
    if feedback.ml_model_enabled and test_fraction > 0:
        kinds.add(BiasKind.EVALUATION)
    return frozenset(kinds)


def _family_values(snap, family: str) -> np.ndarray:
    if family == "theta":
        return snap.theta
    if family == "x_minus_theta":
        return snap.x - snap.theta
    if family in ("yhat_minus_expected_outcome", "yhat_minus_theta"):
        return snap.y_hat - snap.theta
    raise ValueError(f"unknown statistic family {family!r}")


def checkpoint_group_stats(trace: Trace, step: int,
                           family: str) -> dict[str, GroupStats]:
    """Tukey stats of one value family, per group, at a checkpoint."""
    snap = trace.checkpoint(step)
    values = _family_values(snap, family)
    out = {}
    for gi, label in enumerate(trace.group_labels):
        mask = snap.group_idx == gi
        out[label] = tukey_stats(values[mask], label)
    return out


def representation_share(trace: Trace, group: str, step: int) -> float:
    """Fraction of the population in ``group`` at a checkpoint."""
    snap = trace.checkpoint(step)
    gi = trace.group_labels.index(group)
    counts = np.bincount(snap.group_idx, minlength=len(trace.group_labels))
    total = int(counts.sum())
    expected = sum(trace.config.sizes.values())
    if total != expected:
        raise ValueError(f"checkpoint population {total} != configured size {expected}")
    return float(counts[gi]) / total


def measurement_error_stats(trace: Trace, step: int) -> dict[str, GroupStats]:
    """Per-group Tukey stats of the measurement error x - theta."""
    return checkpoint_group_stats(trace, step, "x_minus_theta")


def prediction_error_stats(trace: Trace, step: int,
                           reference: str = "expected_outcome") -> dict[str, GroupStats]:
    """Per-group Tukey stats of the prediction error.

    ``reference`` picks the baseline: the member's expected outcome or the
    latent theta.  Both resolve to theta under the expected-outcome
    definition used here.
    """
    if reference not in ("expected_outcome", "theta"):
        raise ValueError(f"unknown reference {reference!r}")
    family = ("yhat_minus_expected_outcome" if reference == "expected_outcome"
              else "yhat_minus_theta")
    return checkpoint_group_stats(trace, step, family)
