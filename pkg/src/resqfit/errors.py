"""Exception hierarchy and warning categories.

The CLI maps exception classes to exit codes: ValidationError -> 1,
FitError -> 2, OSError -> 3. Ingest failures use distinct subclasses so
callers can branch on the failure mode rather than parse messages.
"""


class ResqfitError(Exception):
    """Base class for all package errors."""


class ValidationError(ResqfitError):
    """Invalid input data, file contents, or configuration."""


class UnknownFormatError(ValidationError):
    """Trace file is in no supported format."""


class NonMonotonicFrequencyError(ValidationError):
    """Frequency column is not strictly increasing."""


class NonFiniteSampleError(ValidationError):
    """NaN or infinite value found in input data."""


class ConfigError(ValidationError):
    """Run configuration is malformed or references missing paths."""


class FitError(ResqfitError):
    """A fit failed to produce a usable result."""


class NoResonanceError(FitError):
    """The trace does not contain an identifiable resonance."""


class EdgeClippedError(FitError):
    """The fitted resonance frequency lies outside the measured span."""


class NegativeQiError(FitError):
    """Diameter-corrected internal loss came out non-positive (overcoupled misfit)."""


class IdentifiabilityError(FitError):
    """The requested free-parameter set is not identifiable from the data."""


class ConvergenceError(FitError):
    """Optimization did not converge within the iteration budget.

    Carries the best-effort value reached so far in ``best_value``.
    """

    def __init__(self, message, best_value=None):
        super().__init__(message)
        self.best_value = best_value


class EdgeClipWarning(UserWarning):
    """Resonance minimum sits within a few points of the grid edge."""
