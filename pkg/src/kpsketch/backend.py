"""Kernel backend selection.

The hot numeric loops (variate generation, sketch application, recovery,
estimation) exist twice with identical signatures: a numba ``@njit``
version in ``_kernels_numba`` and a pure-numpy version in
``_kernels_numpy``. The environment variable ``KPSKETCH_BACKEND``
selects one:

* unset / ``numba``  -- use the numba kernels (falls back to numpy with a
  warning only when unset and numba cannot be imported),
* ``numpy``          -- force the pure-numpy fallback.

Both backends derive the same pseudorandom streams bit-for-bit; floating
point reductions may differ in the last few ulps between them, so results
are reproducible per backend, not across backends.
"""

import os
import warnings

ENV_VAR = "KPSKETCH_BACKEND"


def _load():
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        from . import _kernels_numpy as kernels
        return kernels
    try:
        from . import _kernels_numba as kernels
        return kernels
    except ImportError:
        if choice == "numba":
            raise
        warnings.warn("numba is unavailable; using the pure-numpy kernel fallback")
        from . import _kernels_numpy as kernels
        return kernels


kernels = _load()
BACKEND = kernels.NAME
