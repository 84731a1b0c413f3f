"""Pick the compiled kernels when available, else the pure-Python twins.

Set ``VOTERLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_kernels(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


if _ckernels is None or os.environ.get("VOTERLAB_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = "cython"

kernels = get_kernels(BACKEND)
