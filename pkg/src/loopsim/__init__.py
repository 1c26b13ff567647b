"""loopsim: a deterministic simulator of feedback loops in ML-based
recommendation pipelines, with the bias metrics each loop type affects."""

from .engine import (SimulationConfig, SimulationState, Trace,
                     build_initial_training_set, detect_equilibrium, run,
                     step)
from .errors import ConfigurationError, TrainingDivergedError, ValidationError
from .feedback import (FeedbackConfig, apply_feature_feedback,
                       apply_individual_feedback, apply_sampling_feedback,
                       gate_dataset_append, shifted_click_probability)
from .harness import (aggregate_report, export_trace, load_config,
                      run_experiment, save_config)
from .metrics import (BiasKind, GroupStats, bias_annotation,
                      checkpoint_group_stats, measurement_error_stats,
                      prediction_error_stats, representation_share)
from .model import (Dataset, EvalMetrics, LogisticModel, TrainConfig, decide,
                    evaluate, fit, loss_and_gradient, predict, split)
from .population import (GroupParams, Individual, Population,
                         click_probability, draw_truncated_normal,
                         init_population, realize_feature, realize_outcome)
from .presets import PRESET_NAMES, preset
from .rng import RandomStreams, stream

__version__ = "0.1.0"

__all__ = [
    "BiasKind", "ConfigurationError", "Dataset", "EvalMetrics",
    "FeedbackConfig", "GroupParams", "GroupStats", "Individual",
    "LogisticModel", "Population", "PRESET_NAMES", "RandomStreams",
    "SimulationConfig", "SimulationState", "Trace", "TrainConfig",
    "TrainingDivergedError", "ValidationError",
    "aggregate_report", "apply_feature_feedback", "apply_individual_feedback",
    "apply_sampling_feedback", "bias_annotation", "build_initial_training_set",
    "checkpoint_group_stats", "click_probability", "decide",
    "detect_equilibrium", "draw_truncated_normal", "evaluate", "export_trace",
    "fit", "gate_dataset_append", "init_population", "load_config",
    "loss_and_gradient", "measurement_error_stats", "predict",
    "prediction_error_stats", "preset", "realize_feature", "realize_outcome",
    "representation_share", "run", "run_experiment", "save_config",
    "shifted_click_probability", "split", "step", "stream",
]
