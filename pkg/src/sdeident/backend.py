"""Selects the stepping kernel at import time.

The compiled extension is preferred; the NumPy fallback keeps everything
working when it is missing.  Set SDEIDENT_BACKEND=python to force the
fallback (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _em_py

try:
    from . import _em_c
except ImportError:  # pragma: no cover - depends on the build environment
    _em_c = None

if os.environ.get("SDEIDENT_BACKEND", "").lower() == "python" or _em_c is None:
    active = _em_py
    ACTIVE_NAME = "python"
else:
    active = _em_c
    ACTIVE_NAME = "compiled"

HAVE_COMPILED = _em_c is not None


def available() -> dict[str, object]:
    """Name -> kernel module for every importable backend."""
    out = {"python": _em_py}
    if _em_c is not None:
        out["compiled"] = _em_c
    return out
