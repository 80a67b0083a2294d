"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy fallback is
otherwise identical in behavior. Set DETCAL_FORCE_FALLBACK=1 to skip the
extension (useful for benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DETCAL_FORCE_FALLBACK"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

BACKEND_NAME = "compiled" if kernels.IS_COMPILED else "python"
