"""Stepping-engine selection: compiled core when available, NumPy fallback.

The hot loop of every study is the per-step chain recursion (the fine-grid
reference alone takes T / h_ref steps per path).  A Cython extension
implements it for the built-in potentials; the NumPy engine implements the
identical recursion for everything else and for environments without a
compiler.  Selection happens once at import and can be pinned with the
environment variable ``LANGEVIN_BENCH_ENGINE=numpy|cython``.

Both engines follow one contract (see numpy_engine.run_batch); results
agree to floating-point roundoff, not bitwise, so the active engine is
recorded in every CSV the CLI writes.
"""

from __future__ import annotations

import os

import numpy as np

from ..potentials import PotentialSpec
from . import numpy_engine

__all__ = ["get_engine", "engine_for", "active_engine_name", "available_engines", "BatchResult"]

BatchResult = numpy_engine.BatchResult

try:
    from . import cython_engine

    _HAVE_CYTHON = True
except ImportError:  # pragma: no cover - depends on the build environment
    cython_engine = None
    _HAVE_CYTHON = False


def available_engines() -> tuple[str, ...]:
    return ("cython", "numpy") if _HAVE_CYTHON else ("numpy",)


def _default_name() -> str:
    env = os.environ.get("LANGEVIN_BENCH_ENGINE", "auto").lower()
    if env in ("", "auto"):
        return "cython" if _HAVE_CYTHON else "numpy"
    if env not in ("numpy", "cython"):
        raise ValueError(f"LANGEVIN_BENCH_ENGINE must be numpy|cython|auto, got {env!r}")
    if env == "cython" and not _HAVE_CYTHON:
        raise ImportError("LANGEVIN_BENCH_ENGINE=cython but the compiled core is not importable")
    return env


def get_engine(name: str | None = None):
    """The engine module named, or the default selection."""
    name = _default_name() if name in (None, "auto") else name
    if name == "numpy":
        return numpy_engine
    if name == "cython":
        if not _HAVE_CYTHON:
            raise ImportError("compiled core not available; rebuild or use the numpy engine")
        return cython_engine
    raise ValueError(f"unknown engine {name!r}")


def engine_for(spec: PotentialSpec, name: str | None = None):
    """Engine able to step this potential: custom (non-builtin) potentials
    always run on the NumPy engine."""
    eng = get_engine(name)
    if eng is not numpy_engine and spec.kernel_id < 0:
        return numpy_engine
    return eng


def active_engine_name() -> str:
    return _default_name()
