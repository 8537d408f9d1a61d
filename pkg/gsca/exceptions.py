"""Exception types shared by the library and the command-line driver."""


class GscaError(Exception):
    """Base error. ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidArgumentError(GscaError, ValueError):
    """A parameter is outside its domain."""

    exit_code = 1


class DataError(GscaError, ValueError):
    """Input data is malformed or inconsistent."""

    exit_code = 2


class NumericError(GscaError, ArithmeticError):
    """A numerical procedure failed (non-finite iterate, SVD, search)."""

    exit_code = 3


class SaturationWarning(UserWarning):
    """The fit stopped because sigma^2 fell below the saturation floor."""
