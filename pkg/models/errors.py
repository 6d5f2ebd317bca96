"""
Exception hierarchy for the bandit library and harness.
Each error carries the process exit code the CLI should return.
"""


class BanditError(Exception):
    """Base class for every error raised by this package."""
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidConfigError(BanditError, ValueError):
    """Unknown descriptor, invalid parameter or inconsistent run configuration."""
    exit_code = 1


class ProtocolError(BanditError, RuntimeError):
    """A policy or queue was driven out of protocol (order, duplicates, unknown rounds)."""
    exit_code = 1


class StepSizeError(ProtocolError):
    """A step-size schedule produced a non-positive or increasing value."""


class TraceError(BanditError, ValueError):
    """An oracle was asked to evaluate an incomplete run record."""
    exit_code = 1


class VerificationError(BanditError):
    """At least one verification check failed."""
    exit_code = 2
