"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class SizeCapError(ValueError):
    """An exhaustive oracle was asked to handle an input above its size cap."""


class NormalizationError(ValueError):
    """Input data violates a required normalization convention."""


class ResolutionError(RuntimeError):
    """The requested accuracy is not attainable at the current grid resolution."""


class UnsupportedKernelError(TypeError):
    """The kernel family lacks the capability needed by the operation."""


class ConfigError(ValueError):
    """An experiment configuration file is malformed or inconsistent."""
