"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
NumPy fallback in ``_pykernels`` is used. Set ``SYMCYCLE_PURE_PYTHON=1`` to
force the fallback (used by the benchmark and the backend-agreement tests).
"""
import os

from . import _pykernels

BACKEND = "python"
integrate = _pykernels.integrate
fixed_point_map = _pykernels.fixed_point_map

if not os.environ.get("SYMCYCLE_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        _ckernels = None
    else:
        BACKEND = "cython"
        integrate = _ckernels.integrate
        fixed_point_map = _ckernels.fixed_point_map
else:
    _ckernels = None


def backends():
    """Return ``{name: module}`` for every kernel backend available here."""
    found = {"python": _pykernels}
    if _ckernels is not None:
        found["cython"] = _ckernels
    else:
        try:
            from . import _ckernels as ck
        except ImportError:
            pass
        else:
            found["cython"] = ck
    return found
