"""Kernel selection: compiled extension when available, pure Python otherwise.

Set HOMOPHILY_PURE_KERNEL=1 to force the pure kernel (parity testing,
benchmarking).  Both kernels consume the same RNG stream and produce
bit-identical traces.
"""

from __future__ import annotations

import os

from . import _pure

try:
    from . import _core  # compiled extension

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _core = None
    HAVE_COMPILED = False


def get_kernel(flavor: str | None = None):
    """Return the kernel module.  ``flavor`` in {None, 'compiled', 'pure'}."""
    if flavor is None:
        if os.environ.get("HOMOPHILY_PURE_KERNEL") == "1":
            return _pure
        return _core if HAVE_COMPILED else _pure
    if flavor == "pure":
        return _pure
    if flavor == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel is not available in this install")
        return _core
    raise ValueError(f"unknown kernel flavor {flavor!r}")


def kernel_flavor(flavor: str | None = None) -> str:
    return get_kernel(flavor).FLAVOR
