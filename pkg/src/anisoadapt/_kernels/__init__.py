"""Numerical core routines, compiled when available.

The Cython module ``_ckernels`` is used if it was built; otherwise the numpy
module ``_pykernels`` is used.  Setting ``ANISOADAPT_PURE=1`` in the
environment forces the numpy path.  ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

_ck = None
if not os.environ.get("ANISOADAPT_PURE"):
    try:
        from . import _ckernels as _ck
    except ImportError:  # pragma: no cover - depends on build
        _ck = None

_impl = _ck if _ck is not None else _pykernels
BACKEND = "cython" if _ck is not None else "numpy"

tet_geometry = _impl.tet_geometry
local_stiffness = _impl.local_stiffness
lsq_normal_systems = _impl.lsq_normal_systems
locate_points = _impl.locate_points


def implementations():
    """Mapping of backend name to module, for parity tests and benchmarks."""
    out = {"numpy": _pykernels}
    if _ck is not None:
        out["cython"] = _ck
    return out
