"""Kernel selection: the compiled extension unless unavailable or disabled."""

from __future__ import annotations

import os

from . import _kernel_py

MAX_COMPILED_BLOCK = 64


def _load():
    if os.environ.get("VECGNNDR_PURE_PYTHON", "").strip() not in ("", "0"):
        return None
    try:
        from . import _kernel
    except ImportError:
        return None
    return _kernel


_compiled = _load()
BACKEND = "cython" if _compiled is not None else "python"


def get_kernel(name: str | None = None, block: int = 1):
    """Chain function for ``name`` (``cython``/``python``/None for the default)."""
    if name is None:
        name = BACKEND
    if name == "python" or block > MAX_COMPILED_BLOCK:
        return _kernel_py.run_chain
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled MCMC kernel is not available")
        return _compiled.run_chain
    raise ValueError(f"unknown backend {name!r}")
