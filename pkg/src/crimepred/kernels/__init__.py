"""Numeric kernel backend selection.

The compiled Cython extension is preferred; the pure-NumPy module is the
fallback. Set CRIMEPRED_PURE_PYTHON=1 to force the fallback (used by the
benchmark and by tests that exercise both paths).
"""

from __future__ import annotations

import os

from . import _pykernels

_FORCE_PURE = os.environ.get("CRIMEPRED_PURE_PYTHON", "").lower() in ("1", "true", "yes")

if _FORCE_PURE:
    _impl = _pykernels
    _BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        _BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        _BACKEND = "python"

lloyd = _impl.lloyd
assign_points = _impl.assign_points
best_split = _impl.best_split
knn_votes = _impl.knn_votes
kde_grid = _impl.kde_grid


def backend() -> str:
    """Name of the active kernel backend: "cython" or "python"."""
    return _BACKEND
