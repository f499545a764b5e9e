"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes (see ``EXIT_CODES``).
"""


class TangentOTError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidInputError(TangentOTError, ValueError):
    """Malformed or inconsistent input (shapes, masses, parameters)."""

    exit_code = 2


class CutLocusError(InvalidInputError):
    """A point-level log was requested across the cut locus."""


class InvalidPlanError(InvalidInputError):
    """A transport plan charges a pair it is not allowed to charge."""


class ConvergenceError(TangentOTError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    Attributes
    ----------
    residual : float
        Last residual observed.
    iterations : int
        Total iterations performed.
    """

    exit_code = 3

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UnsupportedError(TangentOTError, NotImplementedError):
    """Requested feature or instance class is not supported."""

    exit_code = 4


EXIT_CODES = {
    InvalidInputError: 2,
    ConvergenceError: 3,
    UnsupportedError: 4,
}
