"""Backend selection for the sparse hot loops.

The compiled extension is preferred; ``SFWZOO_BACKEND=python`` forces the
numpy fallback (used by the benchmark and the backend-equivalence tests).
"""
import os

from . import _pykernels

_requested = os.environ.get("SFWZOO_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pykernels
        BACKEND = "python"

row_margins = _impl.row_margins
all_margins = _impl.all_margins
add_weighted_rows = _impl.add_weighted_rows
rows_to_dense = _impl.rows_to_dense
weighted_column = _impl.weighted_column
logistic_loss_sum = _impl.logistic_loss_sum


def available_backends():
    """Map backend name -> kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
