"""Exception hierarchy shared by every module.

All errors derive from ValueError so callers that only know about invalid
values keep working.
"""
from typing import List, Optional


class QrngError(ValueError):
    """Base class for design-chain errors."""


class DomainError(QrngError):
    """An argument lies outside the domain of the operation."""


class ParseError(QrngError):
    """Malformed input file."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SingularityError(DomainError):
    """A conversion is singular at a specific frequency."""

    def __init__(self, message: str, frequency: float):
        self.frequency = frequency
        super().__init__(f"{message} at {frequency:.6g} Hz")


class ConfigValidationError(QrngError):
    """One or more configuration keys are invalid."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class MeasurementError(QrngError):
    """A spectral measurement cannot be made on the given data."""


class CalibrationError(QrngError):
    """Calibration data cannot support the requested normalization."""


class SizingError(QrngError):
    """Extractor sizing yields no output bits."""


class ApplicabilityError(QrngError):
    """A statistical test is not applicable to the given sequence."""
