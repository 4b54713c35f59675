"""Exception and warning classes.

Errors fall into three families that the command line maps to exit codes:
configuration problems (:class:`ValidationError`, exit 2), problems with the
input data (:class:`DataError`, exit 3) and numerical failures
(:class:`NumericalError`, exit 4).
"""


class EclabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EclabError, ValueError):
    """A configuration value or argument is invalid."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DataError(EclabError, ValueError):
    """Input data violates a structural contract."""


class NumericalError(EclabError, ArithmeticError):
    """A computation cannot produce a well-defined answer."""


# --- ingest -----------------------------------------------------------------


class MissingColumn(DataError):
    def __init__(self, column, path=None):
        where = f" in {path}" if path else ""
        super().__init__(f"missing required column {column!r}{where}")
        self.column = column


class DuplicateKey(DataError):
    def __init__(self, key, row=None):
        at = f" (row {row})" if row is not None else ""
        super().__init__(f"duplicate key {key}{at}")
        self.key = key
        self.row = row


class UnparsableRow(DataError):
    def __init__(self, row, reason):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyAfterFilter(DataError):
    pass


class SelfLoop(DataError):
    def __init__(self, country):
        super().__init__(f"country {country!r} listed as its own neighbor")
        self.country = country


# --- matrices ---------------------------------------------------------------


class YearNotFound(DataError):
    def __init__(self, year, available=()):
        super().__init__(f"year {year} not in data (available: {sorted(available)})")
        self.year = year


class EmptyMatrix(DataError):
    pass


class DegenerateMatrix(NumericalError):
    pass


class ZeroUbiquity(NumericalError):
    def __init__(self, activities):
        super().__init__(f"activities with zero ubiquity: {list(activities)}")
        self.activities = list(activities)


class ZeroDenominator(NumericalError):
    pass


# --- complexity -------------------------------------------------------------


class DegenerateSpectrum(NumericalError):
    pass


class RepeatedEigenvalue(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, n_iter=None, residual=None):
        super().__init__(message)
        self.n_iter = n_iter
        self.residual = residual


class ConstantSeries(NumericalError):
    pass


# --- dynamics ---------------------------------------------------------------


class WindowOverlap(ValidationError):
    pass


class YearMissing(DataError):
    pass


class EmptyAtRiskSet(DataError):
    pass


class InsufficientOverlap(DataError):
    pass


# --- econometrics -----------------------------------------------------------


class RankDeficient(NumericalError):
    def __init__(self, columns):
        super().__init__(f"design matrix is rank deficient; collinear columns: {list(columns)}")
        self.columns = list(columns)


class EmptySample(DataError):
    pass


class TooFewObservations(DataError):
    def __init__(self, nobs, k):
        super().__init__(f"{nobs} observations for {k} parameters; need more observations than parameters")
        self.nobs = nobs
        self.k = k


class PerfectSeparation(NumericalError):
    pass


# --- pipeline ---------------------------------------------------------------


class StageError(EclabError):
    """A pipeline stage failed; ``cause`` holds the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def exit_code(exc):
    """Process exit code for an exception: 2 validation, 3 data, 4 numerical."""
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ValidationError):
        return 2
    if isinstance(exc, DataError):
        return 3
    if isinstance(exc, NumericalError):
        return 4
    return 1


# --- warnings ---------------------------------------------------------------


class DisconnectedGraphWarning(UserWarning):
    """A graph that should be connected splits into several components."""


class WeakInstrumentWarning(UserWarning):
    """First-stage F statistic on the excluded instrument is below 10."""


class NoConvergenceWarning(UserWarning):
    pass
