"""Select the compiled kernel extension or the numpy fallback at import time.

Set ``SMNMIX_BACKEND=python`` or ``SMNMIX_BACKEND=compiled`` to force a
backend; the default prefers the compiled extension when it is importable.
"""

import os

_requested = os.environ.get("SMNMIX_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "python"):
    raise RuntimeError(
        f"SMNMIX_BACKEND must be 'compiled' or 'python', got {_requested!r}"
    )

if _requested == "python":
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]
        BACKEND = "python"

__all__ = ["BACKEND", "kernels"]
