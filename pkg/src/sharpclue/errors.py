"""Exception taxonomy shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 1,
DataError exits 2, NumericError exits 3.
"""


class DataError(Exception):
    """Bad input data: missing files, malformed manifests, shape mismatches."""


class NumericError(Exception):
    """Numeric failure during optimization (NaN/Inf loss or gradients)."""
