"""Exception hierarchy shared by the inference engine and the CLI."""


class GpgasError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(GpgasError, ValueError):
    """Model parameters violate the model's declared domain."""


class ConfigurationError(GpgasError, ValueError):
    """Invalid sampler, grid or experiment configuration."""


class InitializationError(GpgasError, ValueError):
    """The initial latent path has zero posterior density."""


class DegenerateWeightsError(GpgasError, ArithmeticError):
    """Every importance weight is zero (all log weights are -inf)."""

    def __init__(self, message="all importance weights are zero", t=None):
        if t is not None:
            message = f"{message} (t={t})"
        super().__init__(message)
        self.t = t
