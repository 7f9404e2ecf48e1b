"""Select the compiled kernels when available, numpy otherwise.

Set ``HALFLINE_BVP_PURE=1`` to force the numpy implementation.
"""

import os

from . import _pycore

pure = _pycore

if os.environ.get("HALFLINE_BVP_PURE", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernel as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else pure
NAME = "cython" if compiled is not None else "numpy"

kernel_matrix = active.kernel_matrix
interior_coef = active.interior_coef
hermite_eval = active.hermite_eval
