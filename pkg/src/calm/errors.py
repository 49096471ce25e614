"""Exception types shared across the package.

Two failure classes matter to callers: bad inputs (shapes, ranges,
unparseable configs) and numerical breakdown at runtime (non-finite
states, diverged iterations).  The CLI maps them to exit codes 2 and 3.
"""


class CalmError(Exception):
    """Base class for package errors."""


class InvalidArgumentError(CalmError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(InvalidArgumentError):
    """A config file failed validation; carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericError(CalmError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    def __init__(self, message: str, **context):
        self.context = context
        if context:
            detail = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({detail})"
        super().__init__(message)
