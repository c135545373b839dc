"""Kernel backend selection.

The compiled extension is used when it imports; setting
``CALWEIGHT_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _fallback

kernels = _fallback
if os.environ.get("CALWEIGHT_PURE_PYTHON", "").strip() not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND: str = kernels.BACKEND


def available_backends() -> dict:
    """All importable kernel modules keyed by backend name."""
    found = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        return found
    found["compiled"] = _kernels
    return found
