"""typlab: random band Hamiltonians, typicality of macro-state weights, and eigenvector delocalization."""

__version__ = "0.1.0"

from . import bounds, ensembles, hilbert, spectral, typicality  # noqa: E402
from .errors import (  # noqa: E402
    BranchError,
    ConfigError,
    DegenerateSpectrumWarning,
    DomainError,
    EstimatorError,
    InvalidDecompositionError,
    IterationError,
    NumericError,
    SpecError,
    TyplabError,
    ValidationError,
)

__all__ = [
    "__version__",
    "bounds",
    "ensembles",
    "hilbert",
    "spectral",
    "typicality",
    "BranchError",
    "ConfigError",
    "DegenerateSpectrumWarning",
    "DomainError",
    "EstimatorError",
    "InvalidDecompositionError",
    "IterationError",
    "NumericError",
    "SpecError",
    "TyplabError",
    "ValidationError",
]
