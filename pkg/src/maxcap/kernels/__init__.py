"""Hot-kernel backend selection: compiled extension when available, numpy
fallback otherwise.  Set MAXCAP_FORCE_NUMPY=1 to skip the extension."""

import os

from . import _npkern

BACKEND = "numpy"

if not os.environ.get("MAXCAP_FORCE_NUMPY"):
    try:
        from maxcap import _fastkern as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _npkern
else:
    _impl = _npkern

log_kernel_matrix = _impl.log_kernel_matrix
potential_many = _impl.potential_many
cauchy_many = _impl.cauchy_many
quotient_double_sum = _impl.quotient_double_sum

__all__ = [
    "BACKEND",
    "log_kernel_matrix",
    "potential_many",
    "cauchy_many",
    "quotient_double_sum",
]
