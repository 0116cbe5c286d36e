"""Backend selection for the fixed-point kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over.  Set ``DIOPHDIM_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _pykernels

python_backend = _pykernels

compiled_backend = None
if os.environ.get("DIOPHDIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend or python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

record_scan = backend.record_scan
ball_scan = backend.ball_scan
shell_minima = backend.shell_minima
ball_hits = backend.ball_hits

U64_MAX = (1 << 64) - 1
