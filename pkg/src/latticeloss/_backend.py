"""Kernel backend selection.

The compiled extension is preferred when present; the pure-Python kernels
are a drop-in fallback. ``LATTICELOSS_KERNELS`` forces a choice: ``c``
(fail if the extension is missing), ``py``, or ``auto`` (the default).
"""

import os

_requested = os.environ.get("LATTICELOSS_KERNELS", "auto").lower()

if _requested in ("auto", "c", "compiled"):
    try:
        from . import _kernels as kernels

        BACKEND = "compiled"
    except ImportError:
        if _requested != "auto":
            raise
        from . import _kernels_py as kernels

        BACKEND = "python"
elif _requested in ("py", "python"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    raise RuntimeError(
        f"unrecognized LATTICELOSS_KERNELS={_requested!r}; expected 'auto', 'c' or 'py'"
    )


def backend_name() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return BACKEND
