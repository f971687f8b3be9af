"""Integrator backend selection: compiled extension with pure-Python fallback.

The compiled kernel (`_native`) is used when it built successfully; set the
environment variable ``QAPM_PURE_KERNEL=1`` to force the fallback.  Both
backends implement the same contract and produce bit-identical results.
"""

from __future__ import annotations

import os

from . import _pykernel

if os.environ.get("QAPM_PURE_KERNEL"):
    _impl = _pykernel
    BACKEND = "pure-python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernel
        BACKEND = "pure-python"

advance_held = _impl.advance_held
MAX_STATE = _pykernel.MAX_STATE
