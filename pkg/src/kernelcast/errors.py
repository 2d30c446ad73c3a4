"""Exception types shared across the package."""


class KernelcastError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(KernelcastError, ValueError):
    """Input data violates a documented precondition."""


class CapacityError(KernelcastError):
    """A requested feature space or table exceeds representable capacity."""


class ConditioningError(KernelcastError):
    """A linear solve failed even after diagonal jitter escalation."""


class SimulationError(KernelcastError):
    """A numerical integrator failed to produce the requested trajectory."""


class NormBoundError(InvalidInputError):
    """A sample violates the norm bound required by the Volterra kernel.

    Attributes
    ----------
    position : int or None
        Index of the offending sample within the sequence being processed,
        when known.
    """

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class GridSearchError(KernelcastError):
    """Every hyperparameter candidate failed during cross-validation."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ConfigError(KernelcastError):
    """An experiment configuration is malformed.

    ``field`` holds a dotted path such as ``dataset.kind`` when available.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DependencyError(ConfigError):
    """A pipeline stage is missing an upstream artifact or hashes disagree."""


class ParseError(InvalidInputError):
    """A CSV file is malformed; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
