"""Kernel backend selection: compiled extension when available, numpy twin
otherwise. Set SQHHG_FORCE_NUMPY=1 to force the fallback (used by the
backend-equivalence tests and the benchmark)."""

import os

if os.environ.get("SQHHG_FORCE_NUMPY") == "1":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _splitstep as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import numpy_backend as _impl

        BACKEND = "numpy"

apply_half_step = _impl.apply_half_step
apply_half_step_accum = _impl.apply_half_step_accum


def backend_name() -> str:
    return BACKEND
