"""Error hierarchy shared by the services, the CLI and the REST layer."""
from typing import Optional


class WipinError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code: int = 2


class EmptyInputError(WipinError):
    """Raised when a series, matrix or list that must be non-empty is empty."""


class ParseError(WipinError):
    """Raised when a CSI, feature or model file does not match its schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(WipinError):
    """Raised when a subject has fewer sessions than a split requires."""

    def __init__(self, message: str, subject: Optional[int] = None):
        self.subject = subject
        super().__init__(message)


class InvalidSpecError(WipinError):
    """Raised for an unrealizable filter specification."""


class InvalidInputError(WipinError):
    """Raised for non-finite values or shape mismatches."""


class InvalidLabelsError(WipinError):
    """Raised when training labels do not cover {1..N} with N >= 2."""


class DegenerateModelError(WipinError):
    """Raised when no training instance survives threshold learning."""


class CohortError(WipinError):
    """Raised when subjects cannot be placed at the requested separation."""


class InvalidRangeError(WipinError):
    """Raised when an evaluation range does not fit the dataset."""

    exit_code = 3
