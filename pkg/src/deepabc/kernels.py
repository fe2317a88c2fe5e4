"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise, or when
``DEEPABC_PURE_PYTHON=1`` is set, the numpy fallback is used. ``BACKEND``
names the active one.
"""

import os

from . import _fallback

try:
    if os.environ.get("DEEPABC_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _impl
except ImportError:
    _impl = _fallback
    BACKEND = "python"
else:
    BACKEND = "cython"

ising_sweeps = _impl.ising_sweeps
ma2_loglik_batch = _impl.ma2_loglik_batch

__all__ = ["BACKEND", "ising_sweeps", "ma2_loglik_batch"]
