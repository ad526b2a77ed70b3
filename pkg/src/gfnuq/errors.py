"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors to 1, numerical failures
to 2 and I/O problems to 3.
"""


class GfnUqError(Exception):
    """Base class for every error raised by gfnuq."""


class UsageError(GfnUqError, ValueError):
    """Bad arguments: dimension mismatch, invalid token id, unknown option."""


class NumericalError(GfnUqError, ArithmeticError):
    """A computation produced a non-finite value or an ill-conditioned system."""


class ConditioningError(NumericalError):
    """A linear system could not be factorised."""


class TrainingDivergence(NumericalError):
    """A training loop hit a NaN/inf loss."""


class EnvironmentContractError(GfnUqError, RuntimeError):
    """An environment violated the DAG contract (e.g. a dead-end state)."""


class ExpressionError(GfnUqError, ValueError):
    """Malformed token sequence in the symbolic-regression grammar."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at token {position})")
        self.position = position


class DegeneracyError(NumericalError):
    """Data too degenerate for the requested decomposition."""
