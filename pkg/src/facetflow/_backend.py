"""Select the compiled kernels when available, numpy otherwise.

Set ``FACETFLOW_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _kernels_py

kernels = _kernels_py
BACKEND = "python"

if os.environ.get("FACETFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"


def get(name=None):
    """Return a kernel namespace by name (``"cython"``/``"python"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
