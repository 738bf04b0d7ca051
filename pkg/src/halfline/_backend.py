"""Backend selection and the worker-pool helper.

The compiled extension is preferred when it imported cleanly; setting
HALFLINE_FORCE_PY to a truthy value pins the pure numpy implementation
(useful for A/B checks and on platforms without a C toolchain). The
choice is made once at import.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from . import _kernels_py

_FORCE_PY = os.environ.get("HALFLINE_FORCE_PY", "").strip().lower() in {
    "1", "true", "yes", "on"}

_impl = _kernels_py
_name = "python"
if not _FORCE_PY:
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        _name = "compiled"

jost_reduced_sweep = _impl.jost_reduced_sweep
picard_sweep = _impl.picard_sweep


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return _name


def worker_count() -> int:
    """Worker threads for embarrassingly parallel sweeps (HALFLINE_WORKERS)."""
    raw = os.environ.get("HALFLINE_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Order-preserving map over items, threaded when workers > 1.

    Results are collected in input order, so the output is identical to a
    serial map regardless of the worker count.
    """
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
