"""Exception hierarchy shared by all typlab modules."""


class TyplabError(Exception):
    """Base class for every error raised by typlab."""


class InvalidDecompositionError(TyplabError, ValueError):
    pass


class SpecError(TyplabError, ValueError):
    """An ensemble or experiment specification is inconsistent."""


class DomainError(TyplabError, ValueError):
    """An argument lies outside the domain of a formula."""


class ValidationError(TyplabError, ValueError):
    """Input matrix fails a structural check (e.g. Hermiticity)."""


class EstimatorError(TyplabError, ValueError):
    pass


class NumericError(TyplabError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class IterationError(NumericError):
    """Fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BranchError(NumericError):
    """An iterate left the upper half-plane."""


class ConfigError(TyplabError, ValueError):
    """Experiment configuration violates its schema."""


class DegenerateSpectrumWarning(UserWarning):
    """Eigenvalue clusters were detected; block formulas are used."""
