"""Hot numerical kernels with a compiled backend and a numpy fallback.

The Cython extension is used when it was built and imports cleanly;
otherwise the pure-numpy module is used. Setting ``UIRFT_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("UIRFT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

surrogate_head = _impl.surrogate_head
log_softmax_rows = _impl.log_softmax_rows

__all__ = ["BACKEND", "compiled_backend", "log_softmax_rows", "python_backend", "surrogate_head"]
