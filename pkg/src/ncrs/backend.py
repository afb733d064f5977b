"""Selects the kernel backend at import time.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is always available. Set NCRS_BACKEND=python or
NCRS_BACKEND=compiled to force one (forcing a missing compiled build is
an error rather than a silent fallback).
"""

from __future__ import annotations

import os

from ncrs import _kernel_py

try:
    from ncrs import _kernel_c
except ImportError:
    _kernel_c = None


def available_backends() -> dict[str, object]:
    backends = {"python": _kernel_py}
    if _kernel_c is not None:
        backends["compiled"] = _kernel_c
    return backends


def _select():
    forced = os.environ.get("NCRS_BACKEND", "").strip().lower()
    if forced:
        backends = available_backends()
        if forced not in backends:
            raise ImportError(
                f"NCRS_BACKEND={forced!r} requested but that backend is unavailable "
                f"(available: {', '.join(sorted(backends))})"
            )
        return backends[forced]
    return _kernel_c if _kernel_c is not None else _kernel_py


kernel = _select()


def backend_name() -> str:
    return kernel.BACKEND_NAME
