"""Kernel backend selection.

The simulator's hot loop (edge speeds + vehicle advancement) exists twice:
as a compiled Cython extension and as a pure-Python reference. Both produce
bit-identical trajectories; the compiled one is just faster. Selection
happens once at import. Set EVDISPATCH_PURE=1 to force the fallback.
"""
from __future__ import annotations

import os

if os.environ.get("EVDISPATCH_PURE", "") not in ("", "0"):
    from . import _kernels_py as kernels

    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        COMPILED = False


def backend_name() -> str:
    return "compiled" if COMPILED else "pure"
