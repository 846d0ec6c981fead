"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: parse errors -> 2, precondition
violations -> 3, verification criterion failures -> 4.
"""


class TpsurfError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(TpsurfError, ValueError):
    """An argument is outside the operation's documented domain."""


class DimensionMismatchError(InvalidArgumentError):
    """Operands live in incompatible ambient or intrinsic dimensions."""


class PreconditionError(TpsurfError):
    """A documented precondition of an operation does not hold."""


class RankDeficiencyError(PreconditionError):
    """Input vectors are numerically linearly dependent."""


class InsufficientDataError(PreconditionError):
    """Too few sample points to perform the requested estimate."""


class ParseError(TpsurfError):
    """A mesh file failed to parse; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegeneracyError(TpsurfError):
    """A simplex (or an intersection configuration) is degenerate."""


class UnsupportedCaseError(TpsurfError):
    """The (m, n) combination is not implemented for this operation."""


class IterationLimitError(TpsurfError):
    """An iterative construction failed to terminate within its bound."""
