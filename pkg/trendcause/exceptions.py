"""
trendcause Exceptions

Custom exception classes for the trendcause library and CLI.

Every error carries the process exit code the CLI reports for it:
1 stage/numerical failure, 2 bad input, 3 bad config.
"""

from typing import Optional


class TrendCauseError(Exception):
    """Base exception class for trendcause errors."""

    exit_code = 1

    def __init__(self, message: str, exit_code: Optional[int] = None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self):
        return f"{type(self).__name__}: {self.message}"


# ==================== Bad input (exit 2) ====================

class InputError(TrendCauseError):
    """Raised when input data violates a precondition."""

    exit_code = 2


class DateRangeError(InputError):
    """Raised when a date cannot be parsed or falls outside the binning."""

    def __init__(self, message: str = "Date out of range", date: Optional[str] = None):
        super().__init__(message)
        self.date = date


class DimensionMismatchError(InputError):
    """Raised when vectors or series disagree in shape."""

    def __init__(self, message: str = "Dimension mismatch"):
        super().__init__(message)


class EmptyCorpusError(InputError):
    """Raised when no documents survive corpus filtering."""

    def __init__(self, message: str = "Corpus is empty after filtering"):
        super().__init__(message)


class InsufficientDataError(InputError):
    """Raised when a series is too short for the requested model."""

    def __init__(self, message: str = "Not enough data points"):
        super().__init__(message)


class NoSignalError(InputError):
    """Raised when an aggregate carries no mass (all zeros)."""

    def __init__(self, message: str = "no signal in cluster"):
        super().__init__(message)


# ==================== Bad config (exit 3) ====================

class ConfigError(TrendCauseError):
    """Raised when a parameter or configuration file is invalid."""

    exit_code = 3


# ==================== Failures (exit 1) ====================

class StageError(TrendCauseError):
    """Raised when a pipeline stage fails."""

    def __init__(self, message: str = "Stage failed", stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        if self.stage:
            return f"StageError ({self.stage}): {self.message}"
        return f"StageError: {self.message}"


class DivergenceError(TrendCauseError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, message: str = "Training diverged", epoch: Optional[int] = None):
        super().__init__(message)
        self.epoch = epoch


class SynthesisError(TrendCauseError):
    """Raised when the synthetic generator exhausts its retries."""

    def __init__(self, message: str = "Synthetic generation failed"):
        super().__init__(message)
