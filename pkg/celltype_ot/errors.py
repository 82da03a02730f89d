"""Exception hierarchy shared by every module.

Each class carries the exit status the CLI reports for it, so batch pipelines
can tell bad input, a stalled solver and a bad configuration apart.
"""

from __future__ import annotations

from typing import Optional


class CellTypeOTError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(CellTypeOTError):
    exit_code = 2


class ParseError(InputError):
    """Malformed dataset or report file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CoverageError(InputError):
    """A category was never observed where it is required."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"categories never observed: {', '.join(self.missing)}")


class DegenerateInputError(InputError):
    pass


class PreconditionError(InputError):
    pass


class CompositionError(InputError):
    """Transition matrices that do not chain."""


class InsufficientDataError(InputError):
    pass


class SchemaVersionError(InputError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"report schema version {found!r} is not supported (expected {expected})")


class ConvergenceError(CellTypeOTError):
    exit_code = 3

    def __init__(self, message: str, residual: float, iterations: int, time_index: Optional[int] = None):
        self.residual = residual
        self.iterations = iterations
        self.time_index = time_index
        super().__init__(message)

    def at_time(self, time_index: int) -> "ConvergenceError":
        """Copy of this error tagged with the time pair it failed on."""
        return ConvergenceError(
            f"t={time_index}: {self.args[0]}", self.residual, self.iterations, time_index
        )


class ConfigurationError(CellTypeOTError):
    exit_code = 4


class UnsupportedSizeError(ConfigurationError):
    pass
