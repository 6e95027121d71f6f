"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback produces
identical instruction lists and is selected when the extension is not
built or when BLOCKREDUCE_BACKEND=python is set (used by the backend
benchmark and the equivalence tests).
"""

import os

if os.environ.get("BLOCKREDUCE_BACKEND") == "python":
    from . import _kernels_py as kernels
    BACKEND_NAME = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
        BACKEND_NAME = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND_NAME = "python"


def backend_name() -> str:
    return BACKEND_NAME
