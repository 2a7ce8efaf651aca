"""Exception types shared across the package.

DataError covers malformed or inconsistent inputs (files, shapes, labels);
NumericalError covers degenerate numerical situations (no positive
eigenvalues, zero bandwidth, and similar).
"""


class DataError(ValueError):
    """Invalid or inconsistent input data."""


class NumericalError(RuntimeError):
    """A computation reached a degenerate numerical configuration."""
