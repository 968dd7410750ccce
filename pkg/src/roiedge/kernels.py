"""Selects the compiled kernels when available, else the pure-Python fallback.

Set ``ROIEDGE_PURE=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("ROIEDGE_PURE"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

label_components = _impl.label_components
hill_climb_local = _impl.hill_climb_local
conv3x3_padded = _impl.conv3x3_padded

__all__ = ["BACKEND", "label_components", "hill_climb_local", "conv3x3_padded"]
