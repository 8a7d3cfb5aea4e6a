"""Kernel backend selection.

Set TANDEMFLEX_BACKEND to "numba" (require the jitted kernels), "numpy"
(force the pure-numpy fallback), or "auto"/unset (numba when importable).
Both backends produce bit-identical results; see benchmarks/bench_backends.py
for the speed difference.
"""

import os
import warnings

_requested = os.environ.get("TANDEMFLEX_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    warnings.warn(f"unknown TANDEMFLEX_BACKEND={_requested!r}; using 'auto'",
                  stacklevel=1)
    _requested = "auto"

USING_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        from . import kernels_numba as kernels
        USING_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        from . import kernels_numpy as kernels
else:
    from . import kernels_numpy as kernels


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
