"""Exceptions and warnings shared by every module of the toolkit."""


class BinmomError(Exception):
    """Base class for all errors raised by the toolkit"""


class BinmomWarning(UserWarning):
    """Recoverable numerical event (repair, fallback, skipped entry)"""


class ArgumentError(BinmomError, ValueError):
    """Malformed input: wrong shape, empty index set, unknown name"""


class PreconditionError(BinmomError, ValueError):
    """Well-formed input that violates an operation precondition"""


class EnumerationCapError(PreconditionError):
    """Full enumeration of the binary space requested beyond the cap"""


class InfeasibleCoefficientsError(PreconditionError):
    """Correlation coefficients that produce a negative probability"""


class FitError(BinmomError):
    """Newton iteration failed; consumed by the homotopy fallback"""


class NonConvergenceError(FitError):
    """Iterations exhausted or Jacobian singular"""


class BoundaryError(FitError):
    """Solution lies at infinity: parameter beyond the magnitude cap"""


class ContractViolationError(BinmomError):
    """A probability that must be positive is zero"""


class DeterminantDriftError(BinmomError):
    """Incremental determinant no longer matches recomputation"""


class DegenerateIntervalError(BinmomError):
    """Replacement interval is empty; the entry must be skipped"""


class UndefinedMeritError(BinmomError):
    """Target has no correlation, so the figure of merit is 0/0"""
