"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise, or when the
``MRKIT_PURE_PYTHON`` environment variable is set to a non-empty value other
than ``0``, the pure-Python module is used. Both expose the same functions.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("MRKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND: str = _impl.BACKEND
iou_matrix = _impl.iou_matrix
giou_matrix = _impl.giou_matrix
linear_sum_assignment = _impl.linear_sum_assignment
greedy_hits = _impl.greedy_hits


def available_backends() -> dict:
    """Map backend name to module for every backend that imports."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
