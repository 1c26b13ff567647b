"""Config files, trace export, and multi-seed experiment orchestration.

Configs are JSON with strict validation: unknown keys are rejected and
errors name the offending field.  Event exports format reals with 17
significant digits and LF line endings so that identical (build, config,
seed) reproduce identical bytes on any platform.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import SimulationConfig, Trace, detect_equilibrium, run
from .errors import ValidationError
from .feedback import FeedbackConfig
from .metrics import (STAT_FAMILIES, bias_annotation, checkpoint_group_stats)
from .model import TrainConfig
from .population import GroupParams
from .presets import preset

EXPORT_FORMATS = ("events-csv", "checkpoints-csv", "jsonl")

# Metric series tracked for equilibrium detection: (tolerance, window).
EQUILIBRIUM_SPECS = {
    "count": (10.0, 5000),
    "prediction_error_theta": (0.02, 5000),
}


def _f17(v: float) -> str:
    return format(float(v), ".17g")


# -- config files -----------------------------------------------------------

def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    return cls(**data)


def config_to_dict(config: SimulationConfig) -> dict:
    return {
        "groups": {label: dataclasses.asdict(params)
                   for label, params in config.groups.items()},
        "sizes": dict(config.sizes),
        "feedback": dataclasses.asdict(config.feedback),
        "train": dataclasses.asdict(config.train),
        "threshold": config.threshold,
        "total_steps": config.total_steps,
        "checkpoints": list(config.checkpoints),
        "seed": config.seed,
    }


def config_from_dict(data: dict) -> SimulationConfig:
    if not isinstance(data, dict):
        raise ValidationError("config root must be an object")
    allowed = {"groups", "sizes", "feedback", "train", "threshold",
               "total_steps", "checkpoints", "seed"}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"config: unknown key(s) {sorted(unknown)}")
    for key in ("groups", "sizes", "total_steps"):
        if key not in data:
            raise ValidationError(f"config: missing required key {key!r}")
    groups = {}
    for label, gdata in data["groups"].items():
        try:
            groups[label] = _build(GroupParams, gdata, f"groups.{label}")
        except TypeError as exc:
            raise ValidationError(f"groups.{label}: {exc}") from None
    try:
        feedback = _build(FeedbackConfig, data.get("feedback", {}), "feedback")
        train = _build(TrainConfig, data.get("train", {}), "train")
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    config = SimulationConfig(
        groups=groups,
        sizes={k: int(v) for k, v in data["sizes"].items()},
        feedback=feedback,
        train=train,
        threshold=float(data.get("threshold", 0.5)),
        total_steps=int(data["total_steps"]),
        checkpoints=tuple(int(c) for c in data.get("checkpoints", ())) or (0,),
        seed=int(data.get("seed", 0)),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return config


def load_config(path: str | Path) -> SimulationConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def save_config(config: SimulationConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")


# -- trace export -----------------------------------------------------------

def export_trace(trace: Trace, fmt: str, path: str | Path) -> None:
    if fmt not in EXPORT_FORMATS:
        raise ValueError(f"unknown export format {fmt!r}; choose from {EXPORT_FORMATS}")
    try:
        if fmt == "events-csv":
            _export_events_csv(trace, path)
        elif fmt == "checkpoints-csv":
            _export_checkpoints_csv(trace, path)
        else:
            _export_events_jsonl(trace, path)
    except OSError as exc:
        raise OSError(f"cannot write {fmt} export to {path}: {exc}") from exc


def _export_events_csv(trace: Trace, path) -> None:
    ev = trace.events
    labels = trace.group_labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,user_id,group,theta,x,y_hat,d,p,y,dataset_size\n")
        for k in range(len(ev)):
            fh.write(f"{ev.step[k]},{ev.user_id[k]},{labels[ev.group_idx[k]]},"
                     f"{_f17(ev.theta[k])},{_f17(ev.x[k])},{_f17(ev.y_hat[k])},"
                     f"{ev.d[k]},{_f17(ev.p[k])},{ev.y[k]},{ev.dataset_size[k]}\n")


def _export_checkpoints_csv(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,group,statistic_family,count,mean,q1,median,q3,"
                 "whisker_lo,whisker_hi,n_outliers\n")
        for snap in trace.checkpoints:
            for family in STAT_FAMILIES:
                stats = checkpoint_group_stats(trace, snap.step, family)
                for label in trace.group_labels:
                    s = stats[label]
                    fh.write(f"{snap.step},{label},{family},{s.count},"
                             f"{_f17(s.mean)},{_f17(s.q1)},{_f17(s.median)},"
                             f"{_f17(s.q3)},{_f17(s.whisker_lo)},"
                             f"{_f17(s.whisker_hi)},{len(s.outliers)}\n")


def _export_events_jsonl(trace: Trace, path) -> None:
    ev = trace.events
    labels = trace.group_labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k in range(len(ev)):
            row = {
                "step": int(ev.step[k]),
                "user_id": int(ev.user_id[k]),
                "group": labels[ev.group_idx[k]],
                "theta": float(ev.theta[k]),
                "x": float(ev.x[k]),
                "y_hat": float(ev.y_hat[k]),
                "d": int(ev.d[k]),
                "p": float(ev.p[k]),
                "y": int(ev.y[k]),
                "dataset_size": int(ev.dataset_size[k]),
            }
            fh.write(json.dumps(row) + "\n")


def load_checkpoints_csv(path: str | Path) -> list[dict]:
    """Parse a checkpoints export back into row dicts."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = dict(zip(header, parts))
            for key in ("step", "count", "n_outliers"):
                row[key] = int(row[key])
            for key in ("mean", "q1", "median", "q3", "whisker_lo", "whisker_hi"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


# -- multi-seed orchestration -----------------------------------------------

def _run_one(config: SimulationConfig, seed: int) -> Trace:
    return run(config, seed=seed)


def _equilibrium_metrics(trace: Trace) -> dict[str, dict[str, np.ndarray]]:
    series = {
        "count": trace.series_counts.astype(np.float64),
        "prediction_error_theta": trace.series_mean_yhat - trace.series_mean_theta,
    }
    return {name: {label: arr[:, gi] for gi, label in enumerate(trace.group_labels)}
            for name, arr in series.items()}


@dataclass
class ExperimentResult:
    config: SimulationConfig
    preset_name: str | None
    traces: dict[int, Trace]
    failures: dict[int, str]
    report: dict


def aggregate_report(traces: dict[int, Trace], config: SimulationConfig,
                     preset_name: str | None = None,
                     failures: dict[int, str] | None = None) -> dict:
    """Seed-averaged checkpoint statistics plus equilibrium detection.

    Equilibrium is evaluated per seed and on the across-seed mean series;
    detection is skipped (null) when the run is shorter than one window.
    """
    seeds = sorted(traces)
    report: dict = {
        "preset": preset_name,
        "seeds": seeds,
        "n_seeds": len(seeds),
        "bias_annotation": sorted(k.value for k in bias_annotation(
            config.feedback, config.train.test_fraction)),
        "failed_seeds": dict(failures or {}),
    }
    if not traces:
        report["checkpoints"] = {}
        report["equilibrium"] = {}
        return report

    first = traces[seeds[0]]
    labels = first.group_labels

    checkpoints: dict = {}
    for step in first.checkpoint_steps:
        per_group: dict = {}
        for label in labels:
            fam_stats: dict = {}
            for family in STAT_FAMILIES:
                means, counts = [], []
                for t in traces.values():
                    s = checkpoint_group_stats(t, step, family)[label]
                    means.append(s.mean)
                    counts.append(s.count)
                fam_stats[family] = {
                    "mean": float(np.mean(means)),
                    "mean_sd": float(np.std(means)),
                    "count": float(np.mean(counts)),
                }
            per_group[label] = fam_stats
        checkpoints[step] = per_group
    report["checkpoints"] = checkpoints

    equilibrium: dict = {}
    per_trace_metrics = {s: _equilibrium_metrics(t) for s, t in traces.items()}
    for name, (tol, window) in EQUILIBRIUM_SPECS.items():
        if config.total_steps < window + 1:
            equilibrium[name] = None
            continue
        per_metric: dict = {}
        for label in labels:
            per_seed = {}
            stack = []
            for s in seeds:
                series = per_trace_metrics[s][name][label]
                stack.append(series)
                per_seed[s] = detect_equilibrium(series, tol, window)
            mean_series = np.mean(stack, axis=0)
            per_metric[label] = {
                "tolerance": tol,
                "window": window,
                "per_seed": per_seed,
                "mean_series": detect_equilibrium(mean_series, tol, window),
            }
        equilibrium[name] = per_metric
    report["equilibrium"] = equilibrium
    return report


def run_experiment(config_or_preset: SimulationConfig | str,
                   seeds: list[int],
                   parallelism: int = 1,
                   out_dir: str | Path | None = None,
                   export_formats: tuple[str, ...] = ("events-csv", "checkpoints-csv"),
                   ) -> ExperimentResult:
    """Run one config over many seeds; aggregate; optionally export.

    Per-seed failures are recorded and do not abort the sweep.  With
    parallelism > 1 seeds run in a process pool; aggregation is a
    sequential fold either way, so results do not depend on scheduling.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    preset_name = None
    if isinstance(config_or_preset, str):
        preset_name = config_or_preset
        config = preset(config_or_preset)
    else:
        config = config_or_preset
    config.validate()

    traces: dict[int, Trace] = {}
    failures: dict[int, str] = {}
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = {s: pool.submit(_run_one, config, s) for s in seeds}
            for s, fut in futures.items():
                try:
                    traces[s] = fut.result()
                except Exception as exc:
                    failures[s] = f"{type(exc).__name__}: {exc}"
    else:
        for s in seeds:
            try:
                traces[s] = _run_one(config, s)
            except Exception as exc:
                failures[s] = f"{type(exc).__name__}: {exc}"

    report = aggregate_report(traces, config, preset_name, failures)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_config(config, out / "config.json")
        suffix = {"events-csv": "events.csv", "checkpoints-csv": "checkpoints.csv",
                  "jsonl": "events.jsonl"}
        for s, t in traces.items():
            for fmt in export_formats:
                export_trace(t, fmt, out / f"seed_{s}.{suffix[fmt]}")
        with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report, fh, indent=2, default=str)
            fh.write("\n")

    return ExperimentResult(config=config, preset_name=preset_name,
                            traces=traces, failures=failures, report=report)


def report_from_files(run_dir: str | Path) -> dict:
    """Re-aggregate checkpoint statistics from an exported run directory."""
    out = Path(run_dir)
    config = load_config(out / "config.json")
    rows_by_seed = {}
    for path in sorted(out.glob("seed_*.checkpoints.csv")):
        seed = int(path.stem.split("_")[1].split(".")[0])
        rows_by_seed[seed] = load_checkpoints_csv(path)
    if not rows_by_seed:
        raise ValidationError(f"no seed_*.checkpoints.csv files under {out}")

    agg: dict = {}
    for seed, rows in rows_by_seed.items():
        for row in rows:
            key = (row["step"], row["group"], row["statistic_family"])
            agg.setdefault(key, []).append(row["mean"])
    checkpoints: dict = {}
    for (step, group, family), means in sorted(agg.items()):
        checkpoints.setdefault(step, {}).setdefault(group, {})[family] = {
            "mean": float(np.mean(means)),
            "mean_sd": float(np.std(means)),
        }
    return {
        "seeds": sorted(rows_by_seed),
        "n_seeds": len(rows_by_seed),
        "bias_annotation": sorted(k.value for k in bias_annotation(
            config.feedback, config.train.test_fraction)),
        "checkpoints": checkpoints,
    }
