"""Optional numba acceleration for the hot kernels.

The package ships two implementations of every hot loop: a numba ``@njit``
kernel and a vectorized numpy (or heapq, for the label-setting search)
fallback.  Selection is by environment flag:

    WAVEMETRIC_DISABLE_NUMBA=1   force the fallback path
    NUMBA_DISABLE_JIT=1          honored the same way, since running the
                                 kernel loops uncompiled would be far slower
                                 than the vectorized fallbacks

When numba is not importable the fallback path is used silently and
``njit`` degrades to a no-op decorator so the kernel modules still import.
"""

from __future__ import annotations

import os


def _truthy(name: str) -> bool:
    return os.environ.get(name, "0").strip().lower() not in ("", "0", "false", "no")


DISABLED = _truthy("WAVEMETRIC_DISABLE_NUMBA") or _truthy("NUMBA_DISABLE_JIT")

try:
    from numba import njit as _numba_njit

    _importable = True
except ImportError:  # pragma: no cover - exercised only on numba-free installs
    _importable = False

has_numba = _importable and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if has_numba:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap


def resolve_backend(backend: str | None) -> str:
    """Map a backend request ("auto", "numba", "numpy" or None) to a concrete one.

    Asking for "numba" without numba available is an error rather than a silent
    downgrade; benchmarks and tests rely on getting the path they asked for.
    """
    if backend in (None, "auto"):
        return "numba" if has_numba else "numpy"
    if backend == "numba":
        if not has_numba:
            raise RuntimeError(
                "numba backend requested but numba is unavailable or disabled "
                "(WAVEMETRIC_DISABLE_NUMBA/NUMBA_DISABLE_JIT)"
            )
        return "numba"
    if backend == "numpy":
        return "numpy"
    raise ValueError(f"unknown backend {backend!r}; expected 'auto', 'numba' or 'numpy'")
