"""Variational seminorms, jump counts and weak-type constants on periodic grids."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    NormalizationError,
    ResolutionError,
    SizeCapError,
    UnsupportedKernelError,
)
from .sequences import (
    SampleSequence,
    jump_count,
    jump_count_bruteforce,
    jump_surrogate,
    maximal,
    variation,
    variation_bruteforce,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "NormalizationError",
    "ResolutionError",
    "SizeCapError",
    "UnsupportedKernelError",
    "SampleSequence",
    "jump_count",
    "jump_count_bruteforce",
    "jump_surrogate",
    "maximal",
    "variation",
    "variation_bruteforce",
]
