"""Hot counting kernels with a numba backend and a pure-numpy fallback.

Both classifiers reduce their training passes to integer count
aggregation over integer-coded columns; these are the only loops that
matter at cohort scale. The backend is selected once at import time via
the ``LUNGSURV_KERNELS`` environment variable (``numba`` or ``numpy``);
unset means numba when importable, numpy otherwise.

Kernels return exact integer arrays only. All floating-point math is
done by callers in plain Python, so results are bit-identical across
backends.
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("LUNGSURV_KERNELS", "auto").strip().lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"LUNGSURV_KERNELS must be 'numba' or 'numpy', got {_REQUESTED!r}"
    )


def _np_value_class_counts(column, classes, rows, n_values, n_classes):
    keys = column[rows].astype(np.int64) * n_classes + classes[rows]
    return np.bincount(keys, minlength=n_values * n_classes).reshape(
        n_values, n_classes
    )


def _np_sort_by_value(column, rows, n_values):
    vals = column[rows]
    order = np.argsort(vals, kind="stable")
    counts = np.bincount(vals, minlength=n_values)
    offsets = np.zeros(n_values + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return rows[order], offsets


_numba_value_class_counts = None
_numba_sort_by_value = None

if _REQUESTED in ("auto", "numba"):
    try:
        from numba import njit

        @njit(cache=True)
        def _numba_value_class_counts(column, classes, rows, n_values, n_classes):  # type: ignore[misc]
            out = np.zeros((n_values, n_classes), dtype=np.int64)
            for i in range(rows.shape[0]):
                r = rows[i]
                out[column[r], classes[r]] += 1
            return out

        @njit(cache=True)
        def _numba_sort_by_value(column, rows, n_values):  # type: ignore[misc]
            n = rows.shape[0]
            counts = np.zeros(n_values, dtype=np.int64)
            for i in range(n):
                counts[column[rows[i]]] += 1
            offsets = np.zeros(n_values + 1, dtype=np.int64)
            for v in range(n_values):
                offsets[v + 1] = offsets[v] + counts[v]
            cursor = offsets[:-1].copy()
            ordered = np.empty(n, dtype=rows.dtype)
            for i in range(n):
                v = column[rows[i]]
                ordered[cursor[v]] = rows[i]
                cursor[v] += 1
            return ordered, offsets

        _HAS_NUMBA = True
    except ImportError:
        _HAS_NUMBA = False
        if _REQUESTED == "numba":
            raise
else:
    _HAS_NUMBA = False

_ACTIVE = "numba" if (_HAS_NUMBA and _REQUESTED != "numpy") else "numpy"


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return _ACTIVE


def value_class_counts(column, classes, rows, n_values, n_classes):
    """Count (value, class) pairs over the given row subset.

    ``column`` and ``classes`` are int32 code arrays over the full
    dataset; ``rows`` is an int64 index array naming the subset. Returns
    an (n_values, n_classes) int64 matrix.
    """
    if _ACTIVE == "numba":
        return _numba_value_class_counts(column, classes, rows, n_values, n_classes)
    return _np_value_class_counts(column, classes, rows, n_values, n_classes)


def sort_by_value(column, rows, n_values):
    """Stable-partition ``rows`` by their code in ``column``.

    Returns ``(ordered_rows, offsets)`` where rows with code v occupy
    ``ordered_rows[offsets[v]:offsets[v+1]]``, preserving input order
    within each group. Both backends produce identical output.
    """
    if _ACTIVE == "numba":
        return _numba_sort_by_value(column, rows, n_values)
    return _np_sort_by_value(column, rows, n_values)
