"""GRU kernel backends.

Two interchangeable implementations: a compiled Cython module and a pure
numpy fallback. One is chosen at import time via AWLAB_KERNEL:

    auto    compiled if available, else numpy (default)
    cython  compiled, error if the extension is missing
    python  numpy, even when the extension exists (useful for bit-stable
            golden runs independent of the local BLAS)

Both expose gru_forward / gru_backward / gru_cell with identical semantics;
the test suite holds them to near-machine-precision agreement.
"""

from __future__ import annotations

import os

from . import _gru_np

_requested = os.environ.get("AWLAB_KERNEL", "auto")
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(f"AWLAB_KERNEL must be auto, cython, or python, not {_requested!r}")

_cy = None
if _requested in ("auto", "cython"):
    try:
        from . import _gru_cy as _cy  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise RuntimeError("AWLAB_KERNEL=cython but the compiled kernel is not built")
        _cy = None

_impl = _cy if _cy is not None else _gru_np

gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward
gru_cell = _impl.gru_cell


def backend_name() -> str:
    return "cython" if _impl is not _gru_np else "python"


__all__ = ["gru_forward", "gru_backward", "gru_cell", "backend_name"]
