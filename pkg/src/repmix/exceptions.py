"""Exception types raised across the package."""


class RepmixError(Exception):
    """Base class for all package errors."""


class DomainError(RepmixError, ValueError):
    """An argument lies outside the support of the function."""


class DegenerateModelError(RepmixError, ArithmeticError):
    """A mixture model produced a zero or non-finite normalizing constant."""


class DegenerateSampleError(RepmixError, ValueError):
    """A weighted sample carries no positive weight."""


class ConfigError(RepmixError, ValueError):
    """Invalid run or fit configuration."""


class ParseError(RepmixError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
