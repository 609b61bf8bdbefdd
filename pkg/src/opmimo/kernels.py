"""Selects the compiled BCJR kernel when available.

Set ``OPMIMO_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _bcjr_py

BACKEND = "python"
bcjr_logmap = _bcjr_py.bcjr_logmap

if not os.environ.get("OPMIMO_PURE_PYTHON"):
    try:
        from . import _bcjr_ext
    except ImportError:
        pass
    else:
        bcjr_logmap = _bcjr_ext.bcjr_logmap
        BACKEND = "cython"
