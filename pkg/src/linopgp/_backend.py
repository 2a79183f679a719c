"""Select the compiled kernels when available, numpy otherwise.

Set ``LINOPGP_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _kernels_py

if os.environ.get("LINOPGP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

NAME = "cython" if _impl is not _kernels_py else "python"

hermite_deriv = _impl.hermite_deriv
deriv_product = _impl.deriv_product
spectral_sum = _impl.spectral_sum
