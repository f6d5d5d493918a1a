"""Backend selection for the hot numeric kernels.

The compiled Cython extension is preferred when present; otherwise the
pure-numpy fallback is used. Set GRIDVLAD_BACKEND=cython|python to force
one side (cython raises if the extension did not build).
"""

import os

from . import _kernels_py

_requested = os.environ.get("GRIDVLAD_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise ValueError(
        f"GRIDVLAD_BACKEND must be auto, cython or python, got {_requested!r}"
    )

_compiled = None
if _requested in ("auto", "cython"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "GRIDVLAD_BACKEND=cython but the compiled extension is not available; "
                "reinstall with a C compiler and Cython present"
            ) from None

_impl = _compiled if _compiled is not None else _kernels_py

BACKEND = "cython" if _compiled is not None else "python"

nearest_centers = _impl.nearest_centers
residual_sums = _impl.residual_sums
dcd_epoch = _impl.dcd_epoch
