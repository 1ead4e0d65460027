"""Hot inner loops with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``ROSSNN_NO_NUMBA=1`` to
force the numpy path (useful for debugging and for environments without
numba); the numba path is used otherwise whenever numba imports cleanly.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_disabled = os.environ.get("ROSSNN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

_impl = _numpy
if not _disabled:
    try:
        from . import _jit as _impl
    except ImportError:  # numba missing or broken
        log.info("numba unavailable, using numpy kernels")

BACKEND = "numpy" if _impl is _numpy else "numba"

narma_recursion = _impl.narma_recursion
viterbi = _impl.viterbi
lk_integrate = _impl.lk_integrate

__all__ = ["BACKEND", "narma_recursion", "viterbi", "lk_integrate"]
