"""Exception hierarchy shared across the package.

DataError covers anything wrong with inputs (files, schemas, model
documents); NumericalError covers estimation failures (non-convergence,
singular blocks, degenerate variance). The CLI maps these to exit codes.
"""


class PathlensError(Exception):
    """Base class for all package errors."""


class DataError(PathlensError):
    """Invalid input data, schema, or model definition."""


class ModelSpecError(DataError):
    """Malformed or inconsistent model-definition document."""


class NumericalError(PathlensError):
    """Estimation failed numerically."""


class NonConvergenceError(NumericalError):
    """Iterative estimation did not converge within the iteration budget."""
