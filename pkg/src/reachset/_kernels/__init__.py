"""Propagation kernel selection.

The compiled Cython core is used when importable; otherwise the pure-NumPy
fallback. Set REACHSET_KERNEL=python or REACHSET_KERNEL=compiled to force a
backend (the latter raises if the extension is missing). Both kernels share
the propagate_batch signature and the status-code constants.
"""

from __future__ import annotations

import logging
import os

from . import pykernel
from .pykernel import (  # noqa: F401
    CR3BP,
    DP54_ADAPTIVE,
    MASS_DEPLETED,
    OK,
    RK4_FIXED,
    SINGULAR,
    STEP_FAILURE,
    TWO_BODY,
)

log = logging.getLogger(__name__)

_compiled = None
try:
    from . import _core as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (default: env var, then best)."""
    if name is None:
        name = os.environ.get("REACHSET_KERNEL", "").strip() or None
    if name in (None, "auto"):
        return _compiled if _compiled is not None else pykernel
    if name == "python":
        return pykernel
    if name == "compiled":
        if _compiled is None:
            raise ImportError(
                "compiled kernel requested but reachset._kernels._core is not built"
            )
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


_default = get_backend()
if _default is pykernel and "REACHSET_KERNEL" not in os.environ:
    log.info("compiled kernel unavailable; using pure-NumPy fallback")

BACKEND = _default.BACKEND
propagate_batch = _default.propagate_batch
