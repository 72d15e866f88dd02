"""
Exceptions raised by sysrisk.

The three families map onto the command line exit codes: input problems (2),
numerical failures (3) and requests a measure cannot honour (4).
"""

from __future__ import annotations


class SysRiskError(Exception):
    """Base class for every error raised deliberately by this package."""


class InputError(SysRiskError, ValueError):
    """Malformed or inconsistent input data."""


class ScenarioParseError(InputError):
    """A scenario file could not be parsed."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(InputError):
    """A run configuration is invalid."""


class MismatchedSpaceError(InputError):
    """Two random quantities live on different scenario spaces."""


class DimensionMismatchError(InputError):
    """A vector or system has the wrong number of firms or scenarios."""


class BadGroupStructureError(InputError):
    """A group structure does not partition the firms it is applied to."""


class NumericalError(SysRiskError, ArithmeticError):
    """A numerical routine failed to produce a certified answer."""


class NoConvergenceError(NumericalError):
    pass


class NoBracketError(NumericalError):
    pass


class InfeasibleError(NumericalError):
    pass


class UnboundedError(NumericalError):
    pass


class IncompatibleError(SysRiskError, NotImplementedError):
    """The requested operation is not defined for the given measure or rule."""


class UnsupportedError(IncompatibleError):
    pass


class NotDifferentiableError(IncompatibleError):
    pass


class ScaleTooLargeError(IncompatibleError):
    pass
