"""Selects the stencil backend at import time.

The compiled extension is preferred when it imported cleanly; set
``HBMO_BACKEND=numpy`` to force the fallback (e.g. for benchmarking) or
``HBMO_BACKEND=compiled`` to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("HBMO_BACKEND", "auto").lower()

if _requested not in ("auto", "compiled", "numpy"):
    raise RuntimeError(f"HBMO_BACKEND must be auto|compiled|numpy, got {_requested!r}")

kernels = _kernels_py
if _requested in ("auto", "compiled"):
    try:
        from . import _kernels as _compiled
        kernels = _compiled
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError(
                "HBMO_BACKEND=compiled but the hbmo._kernels extension is not built")


def backend_name() -> str:
    """Name of the active stencil backend: 'compiled' or 'numpy'."""
    return kernels.NAME
