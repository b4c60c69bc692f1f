"""Divisor-scan kernels with a compiled core and a pure-numpy fallback.

The Cython extension is preferred; set KAMTORI_PURE=1 to force the
numpy implementation (used by the benchmark and the backend-agreement
tests).  Both backends implement the same reduction semantics.
"""

import os

from ._lattice import lattice_shell, norms

if os.environ.get("KAMTORI_PURE", "").strip() not in ("", "0", "false"):
    from . import _ref as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _ref as _impl
        BACKEND = "numpy"

min_divisor_ratio_batch = _impl.min_divisor_ratio_batch
divisor_sum_reduce = _impl.divisor_sum_reduce

__all__ = [
    "BACKEND",
    "lattice_shell",
    "norms",
    "min_divisor_ratio_batch",
    "divisor_sum_reduce",
]
