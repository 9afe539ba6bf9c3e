"""Select the compiled kernel core, falling back to pure Python.

The compiled extension ``gevbayes._ckernels`` (Cython) accelerates the
GEV log-likelihood and the adaptive MCMC loop. When it is missing (no
compiler at install time, or a source checkout without ``build_ext``)
the numpy implementation in ``gevbayes._pykernels`` is used instead.

Set ``GEVBAYES_BACKEND=python`` to force the fallback, or
``GEVBAYES_BACKEND=c`` to make a missing extension a hard error.
"""

from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("GEVBAYES_BACKEND", "").strip().lower()
if _requested not in ("", "c", "python"):
    raise ImportError(f"GEVBAYES_BACKEND must be 'c' or 'python', got {_requested!r}")

if _requested == "python":
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "c":
            raise
        kernels = _pykernels

BACKEND = kernels.BACKEND_NAME
