"""Hot convolution kernels with backend selection at import time.

The compiled Cython extension is preferred when it built; otherwise the
NumPy implementation is used.  Set AUREL_KERNELS=python or AUREL_KERNELS=cython
to force one (forcing cython raises if the extension is missing).
Both expose the same three functions; see benchmarks/bench_kernels.py for a
speed comparison.
"""

from __future__ import annotations

import os

from aurel.kernels import pyconv as _py

_forced = os.environ.get("AUREL_KERNELS", "").strip().lower()

if _forced == "python":
    _impl = _py
elif _forced == "cython":
    from aurel.kernels import _cyconv as _impl  # type: ignore[no-redef]
else:
    try:
        from aurel.kernels import _cyconv as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _py

BACKEND = _impl.BACKEND_NAME
conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
