"""Select the compiled gas kernel, or the pure-Python twin.

Set ``MMLAB_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("MMLAB_PURE_PYTHON", "") not in ("", "0"):
    from . import _gascore_py as gascore

    BACKEND = "python"
else:
    try:
        from . import _gascore as gascore  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _gascore_py as gascore

        BACKEND = "python"

__all__ = ["gascore", "BACKEND"]
