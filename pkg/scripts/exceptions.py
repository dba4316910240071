#!/usr/bin/env python3
"""
Custom exception hierarchy for dispersion measurement operations.

Provides specific exception types for the failure modes of the forward
model, the spectrometer simulation and the inverse pipeline, so the CLI
can map them onto distinct exit codes.
"""

from typing import Any, Dict, Optional, Tuple


class DispersionToolError(Exception):
    """Base exception for all dispersion toolkit operations.

    All custom exceptions in this module inherit from this class,
    allowing callers to catch every toolkit failure with a single
    except clause.

    Example:
        try:
            estimate = run_extraction(...)
        except DispersionToolError as e:
            logger.error(f"Extraction failed: {e}")
    """
    pass


class ConfigurationError(DispersionToolError):
    """Invalid or missing run configuration.

    Raised when:
    - The configuration file is not valid JSON
    - A key is unknown or a value fails schema validation
    - The configuration file does not exist

    Attributes:
        key: Dotted path of the offending key (e.g. "interferometer.fut.length_m")
        line: Line number of a JSON syntax error

    Example:
        raise ConfigurationError(
            "interferometer.fut.length_m: must be >= 0",
            key="interferometer.fut.length_m"
        )
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.key = key
        self.line = line


class OutOfRangeError(DispersionToolError):
    """Input outside the domain where a model or mapping is valid.

    Raised when:
    - A wavelength lies outside a dispersion model's validity window
    - A spectrum extends past the spectrometer's calibrated window
    - A delay cannot be inverted inside the calibrated window
    - A length, count or wavelength pair makes a conversion undefined

    Attributes:
        value: The offending value, when scalar
        valid_range: (low, high) bounds that were violated
    """

    def __init__(self, message: str, value: Any = None,
                 valid_range: Optional[Tuple[float, float]] = None):
        super().__init__(message)
        self.value = value
        self.valid_range = valid_range


class GridMismatchError(DispersionToolError):
    """Spectra, envelopes or phase traces are not defined on the same grid.

    Also raised when an operation that relies on even symmetry receives a
    detuning grid that is not symmetric about zero.
    """
    pass


class InsufficientDataError(DispersionToolError):
    """Not enough usable data to carry out an operation.

    Raised when:
    - A spectrum has zero total weight
    - A histogram holds no counts
    - Every point falls below the envelope floor
    - A fit window holds too few points or fringes
    """
    pass


class NumericalError(DispersionToolError):
    """A numerical routine failed on input that passed validation.

    Wraps ValueError and LinAlgError raised inside scipy or numpy during a
    fit, e.g. non-finite residuals or a singular normal matrix.
    """
    pass


class FitConvergenceError(DispersionToolError):
    """Raised-cosine fit failed to converge after bounded restarts.

    Attributes:
        diagnostics: Best-so-far parameters, cost and solver messages

    Example:
        raise FitConvergenceError(
            "fit did not converge after 5 starts",
            diagnostics={"best_cost": 12.3, "best_params": [...]}
        )
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UndersampledFringesError(DispersionToolError):
    """Fewer than four samples per fringe near the edge of the analysis window."""

    def __init__(self, message: str, samples_per_fringe: Optional[float] = None):
        super().__init__(message)
        self.samples_per_fringe = samples_per_fringe


class BootstrapError(DispersionToolError):
    """Too many bootstrap re-fits failed for the spread to be meaningful.

    Attributes:
        failures: Number of failed re-fits
        attempts: Number of resamples attempted
    """

    def __init__(self, message: str, failures: int = 0, attempts: int = 0):
        super().__init__(message)
        self.failures = failures
        self.attempts = attempts
