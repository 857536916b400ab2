"""Time-stepping kernels with a compiled core and a pure-Python fallback.

The compiled extension implements the two hot sweeps (forward
advection-diffusion, backward discounted HJB) in C; the fallback mirrors
them in NumPy/SciPy.  Selection happens at import: set
``MFGLAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MFGLAB_PURE_PYTHON"):
    from mfglab.kernels import _fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from mfglab.kernels import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from mfglab.kernels import _fallback as _impl

        BACKEND = "fallback"

cyclic_tridiag_solve = _impl.cyclic_tridiag_solve
fp_sweep = _impl.fp_sweep
hjb_sweep = _impl.hjb_sweep

__all__ = ["BACKEND", "cyclic_tridiag_solve", "fp_sweep", "hjb_sweep"]
