"""Scan-kernel backend selection.

The compiled extension is preferred when it imports cleanly; otherwise
the numpy fallback is used. ``NOISELIB_KERNELS`` overrides the choice:
``c`` requires the extension (raising if missing), ``py``/``python``
forces the fallback.
"""

import os

_requested = os.environ.get("NOISELIB_KERNELS", "").strip().lower()

if _requested in ("py", "python"):
    from . import _kernels_py as _impl
elif _requested == "c":
    from . import _kernels as _impl  # type: ignore[attr-defined]
elif _requested == "":
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl
else:
    raise ImportError(
        f"unrecognized NOISELIB_KERNELS value {_requested!r}; "
        "expected 'c', 'py', or unset"
    )

BACKEND = _impl.NAME
KTH_BUFFER_LIMIT = _impl.KTH_BUFFER_LIMIT

screen_scores = _impl.screen_scores
kth_largest = _impl.kth_largest
gather_ge = _impl.gather_ge
rescore_dot = _impl.rescore_dot
dist_scan = _impl.dist_scan
argmax = _impl.argmax

__all__ = [
    "BACKEND",
    "KTH_BUFFER_LIMIT",
    "argmax",
    "dist_scan",
    "gather_ge",
    "kth_largest",
    "rescore_dot",
    "screen_scores",
]
