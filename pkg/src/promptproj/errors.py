"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class Error(Exception):
    """Base class for all package errors."""


class ConfigError(Error, ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(Error, ValueError):
    """Malformed or mutually inconsistent input data."""


class NumericalError(Error, RuntimeError):
    """Numerical failure during computation (divergence, degeneracy)."""


class DegenerateDirectionError(NumericalError):
    """A vector with (near-)zero norm where a direction is required."""


class DivergenceError(NumericalError):
    """Training produced a non-finite loss.

    Carries the loss trace observed up to the failure.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
