"""Backend selection for the per-symbol error kernels.

The compiled extension is used when it has been built; set
``COOPGEO_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"

if not os.environ.get("COOPGEO_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels
    else:
        BACKEND = "cython"
else:
    _impl = _pykernels

qam_ser = _impl.qam_ser
count_errors = _impl.count_errors
count_coop_errors = _impl.count_coop_errors
first_error = _impl.first_error

__all__ = ["BACKEND", "qam_ser", "count_errors", "count_coop_errors", "first_error"]
