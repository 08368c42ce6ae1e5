"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``GUESSVI_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used. ``BACKEND`` names the choice.
"""
import os

from . import _kernels_py

if os.environ.get("GUESSVI_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

sweep = _impl.sweep
value_sweeps = _impl.value_sweeps
interval_sweeps = _impl.interval_sweeps
bfs_distances = _impl.bfs_distances


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        found["cython"] = _kernels
    return found
