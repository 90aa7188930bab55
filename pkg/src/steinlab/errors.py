"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SteinLabError(Exception):
    """Base class for all package errors."""


class DomainError(SteinLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(SteinLabError, RuntimeError):
    """A series or iteration failed to converge within its hard cap.

    Carries the partial result accumulated so far in ``partial`` (a
    ``LogValue`` for log-space series, a float otherwise, or ``None``).
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NonIntegrableError(SteinLabError, ValueError):
    """The requested risk integrand is not integrable for the given dimension."""


class ClassificationError(SteinLabError, RuntimeError):
    """Neither tail-slope pattern could be established for a shrinkage factor.

    ``diagnostics`` holds the tail grid data that defeated classification.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificationError(SteinLabError, RuntimeError):
    """No positive risk excess (or a failed bound check) blocked certification.

    ``diagnostics`` holds the grid of attempted noncentrality values and the
    corresponding excess evaluations.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(SteinLabError, ValueError):
    """Invalid or unknown command-line / config-file settings."""
