"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: DataError (and subclasses) -> 2,
NumericalIntegrityError -> 3, ConvergenceError -> 1.
"""


class QscoolError(Exception):
    """Base class for all package errors."""


class FormatError(QscoolError):
    """A file does not conform to the MHX schema (missing/ill-typed field)."""


class DataError(QscoolError):
    """Well-formed input carries physically inconsistent data."""


class DimensionError(DataError):
    """Tensor shapes disagree with each other or with declared sizes."""


class NumericalIntegrityError(QscoolError):
    """A numerical invariant (norm, hermiticity, gradient agreement) was violated."""


class ConvergenceError(QscoolError):
    """An iterative routine failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
