"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set ``MEIBOKIT_PURE_PYTHON=1`` to force the fallback (useful for the parity
tests and the benchmark in ``benchmarks/bench_kernels.py``).
"""

import os

from meibokit.morphometry import kernels_py

if os.environ.get("MEIBOKIT_PURE_PYTHON"):
    _impl = kernels_py
    IMPLEMENTATION = "python"
else:
    try:
        from meibokit.morphometry import _kernels as _impl
        IMPLEMENTATION = "compiled"
    except ImportError:
        _impl = kernels_py
        IMPLEMENTATION = "python"

thin = _impl.thin
longest_path = _impl.longest_path
