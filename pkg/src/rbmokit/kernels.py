"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``RBMOKIT_PURE=1`` to
force the pure-Python fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("RBMOKIT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

maximal_profile = _impl.maximal_profile
max_independent_set = _impl.max_independent_set
greedy_independent = _impl.greedy_independent


def backends():
    """Available backends as a name -> module mapping."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
