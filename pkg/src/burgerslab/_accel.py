"""Backend switch for the hot kernels.

Numba is used when it imports and ``BURGERSLAB_BACKEND`` is unset or
``numba``.  ``BURGERSLAB_BACKEND=numpy`` forces the vectorised fallback.
The choice is made once, at import time.
"""
from __future__ import annotations

import os

_requested = os.environ.get("BURGERSLAB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"BURGERSLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

USE_NUMBA = _requested == "numba" and _nb is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(fn):
    """Compile ``fn`` with numba (nopython, nogil, cached) when available."""
    if _nb is None:
        return fn
    return _nb.njit(cache=True, nogil=True)(fn)
