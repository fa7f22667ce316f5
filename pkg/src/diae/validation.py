"""Input validation helpers shared across the package.

All numerical routines operate on 2-D float64 arrays with one sample per
column.  The helpers here normalize user input to that representation and
enforce the basic contracts (shape, finiteness) so the math code can assume
clean inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "as_matrix",
    "as_label_vector",
    "check_same_cols",
]


class DimensionMismatchError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(a, name: str = "matrix", *, allow_empty_cols: bool = False) -> np.ndarray:
    """Coerce ``a`` to a C-contiguous 2-D float64 array and validate it.

    Parameters
    ----------
    a : array-like
        Input to validate.
    name : str
        Name used in error messages.
    allow_empty_cols : bool
        Permit zero columns (used by encode paths where an empty batch is
        a valid vacuous input).  Zero rows are never allowed.
    """
    m = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if m.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must have at least one row, got shape {m.shape}")
    if m.shape[1] < 1 and not allow_empty_cols:
        raise DimensionMismatchError(f"{name} must have at least one column, got shape {m.shape}")
    if m.size and not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_label_vector(labels, name: str = "labels") -> np.ndarray:
    """Coerce ``labels`` to a 1-D array of non-negative integer class ids."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.number):
        raise ValueError(f"{name} must be numeric class ids")
    out = y.astype(np.int64, copy=True)
    if y.size and np.issubdtype(y.dtype, np.floating):
        if not np.all(np.asarray(y, dtype=np.float64) == out):
            raise ValueError(f"{name} contains non-integer class ids")
    if out.size and out.min() < 0:
        raise ValueError(f"{name} contains negative class ids")
    return out


def check_same_cols(a: np.ndarray, b: np.ndarray, a_name: str, b_name: str) -> None:
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"{a_name} has {a.shape[1]} columns but {b_name} has {b.shape[1]}"
        )
