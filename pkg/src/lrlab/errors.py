"""Exception types shared across the package.

Each class maps to one CLI exit code, so library errors surface as
distinct process statuses (see cli.EXIT_CODES).
"""


class LrLabError(Exception):
    """Base class for all package errors."""


class ParseError(LrLabError):
    """A text input (ESD file, libsvm file, schedule CSV) is malformed."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
        if loc:
            message = f"{loc}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class DegenerateSpectrumError(LrLabError):
    """A spectrum has no usable positive-eigenvalue mass."""


class InvalidParameterError(LrLabError):
    """A parameter is outside the domain where a formula is defined."""


class InfeasibleError(LrLabError):
    """A request cannot be satisfied (e.g. horizon shorter than the number
    of nonempty buckets, or a number's arithmetic requirement fails)."""
