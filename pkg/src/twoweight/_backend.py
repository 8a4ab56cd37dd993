"""Select the compiled kernels when available, else the numpy fallback.

Set TWOWEIGHT_PURE=1 to force the fallback.
"""
import os

from . import _pykernels as pure

try:
    if os.environ.get("TWOWEIGHT_PURE"):
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl

    NAME = "cython"
except ImportError:
    _impl = pure
    NAME = "numpy"

dyadic_index = _impl.dyadic_index
poisson_boxes = _impl.poisson_boxes
profile = _impl.profile
riesz_matrix = _impl.riesz_matrix
