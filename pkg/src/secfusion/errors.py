"""Exception types shared across the package."""


class SecFusionError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SecFusionError):
    """A model, scenario, or estimator configuration is invalid."""


class InputError(SecFusionError):
    """External input (e.g. an attack trace file) is missing or malformed."""


class EstimatorError(SecFusionError):
    """A local estimator step failed numerically.

    Carries the condition estimate of the offending matrix and, when known,
    the time step at which the failure occurred.
    """

    def __init__(self, message, cond=None, step=None):
        self.cond = cond
        self.step = step
        parts = [message]
        if cond is not None:
            parts.append(f"condition estimate {cond:.3e}")
        if step is not None:
            parts.append(f"at step {step}")
        super().__init__(", ".join(parts))


class FusionError(SecFusionError):
    """The fusion weight solve failed even after regularization."""

    def __init__(self, message, cond=None):
        self.cond = cond
        if cond is not None:
            message = f"{message}, condition estimate {cond:.3e}"
        super().__init__(message)
