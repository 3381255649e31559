"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting
``D2DCLUST_PURE_PYTHON=1`` forces the pure-Python reference.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("D2DCLUST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
exhaustive = _impl.exhaustive
branch_and_bound = _impl.branch_and_bound
schedule = _impl.schedule
tie_key = _kernels_py.tie_key
head_feasible = _kernels_py.head_feasible


def backends() -> dict:
    """Every importable backend by name (the benchmark and equivalence tests use this)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
