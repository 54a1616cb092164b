"""Kernel selection: compiled extension when present, NumPy otherwise.

Set ``BETASHRINK_PURE_PYTHON=1`` to force the NumPy kernels.
"""
import os

if os.environ.get("BETASHRINK_PURE_PYTHON"):
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
