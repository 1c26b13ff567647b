"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters supplied to a sampler, config, or preset."""


class ValidationError(ConfigurationError):
    """A config file failed schema or invariant validation."""


class TrainingDivergedError(RuntimeError):
    """Gradient descent produced a non-finite loss."""
