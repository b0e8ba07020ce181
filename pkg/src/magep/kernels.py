"""Select the compiled or the numpy edge kernels at import time.

Set ``MAGEP_PURE_PYTHON=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("MAGEP_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
edge_residual = _impl.edge_residual
lambda_covolume = _impl.lambda_covolume
lambda_barotropic = _impl.lambda_barotropic

__all__ = ["BACKEND", "edge_residual", "lambda_covolume", "lambda_barotropic", "get_backend"]


def get_backend(name: str):
    """Return the kernel module called ``name`` ("cython" or "numpy")."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
