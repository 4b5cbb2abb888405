"""Kernel backend selection.

Two interchangeable implementations of the coordinatewise hot loops live
here: a Cython extension (built at install time when a compiler is
available) and a numpy fallback. They are bitwise identical by
construction, so the choice only affects speed.

Selection happens once at import. The environment variable
``SESOPT_KERNELS`` overrides it:

* ``auto`` (default): compiled if importable, else python
* ``compiled``: require the extension, raise if missing
* ``python``: force the numpy fallback
"""

import os

from . import py_backend

_choice = os.environ.get("SESOPT_KERNELS", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(
        f"SESOPT_KERNELS must be auto, compiled or python (got {_choice!r})"
    )

if _choice == "python":
    _impl = py_backend
else:
    try:
        from . import _fast as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "SESOPT_KERNELS=compiled but the sesopt._kernels._fast "
                "extension is not built"
            ) from None
        _impl = py_backend

BACKEND = _impl.BACKEND

soft_threshold_vec = _impl.soft_threshold_vec
ssf_direction = _impl.ssf_direction
pcd_direction = _impl.pcd_direction
smooth_abs = _impl.smooth_abs
smooth_abs_grad = _impl.smooth_abs_grad
smooth_abs_hess = _impl.smooth_abs_hess

__all__ = [
    "BACKEND",
    "soft_threshold_vec",
    "ssf_direction",
    "pcd_direction",
    "smooth_abs",
    "smooth_abs_grad",
    "smooth_abs_hess",
    "py_backend",
]
