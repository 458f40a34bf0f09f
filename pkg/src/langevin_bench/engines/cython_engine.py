"""Thin wrapper presenting the compiled core under the engine contract."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..potentials import KERNEL_MIXTURE, PotentialSpec
from ..samplers import projection_radius
from . import _core
from .numpy_engine import BatchResult

__all__ = ["run_batch", "BatchResult", "NAME"]

NAME = "cython"

_KIND_CODES = {"lmc": 0, "rlmc": 1, "prlmc": 2}
_EMPTY_STEPS = np.empty(0, dtype=np.int64)


def run_batch(
    kind: str,
    spec: PotentialSpec,
    x0: np.ndarray,
    h: float,
    w: np.ndarray,
    dw_tau: Optional[np.ndarray] = None,
    tau: Optional[np.ndarray] = None,
    theta: float = 1.0,
    blowup: float = 1e6,
    record_steps: Optional[np.ndarray] = None,
) -> BatchResult:
    """Same contract as numpy_engine.run_batch, built-in potentials only."""
    if spec.kernel_id < 0:
        raise ValueError(
            f"potential {spec.name!r} has no compiled kernel; use the numpy engine"
        )
    if kind not in _KIND_CODES:
        raise ValueError(f"unknown kind {kind!r}")
    x0 = np.ascontiguousarray(x0, dtype=float)
    B, d = x0.shape
    n_steps = w.shape[1] - 1
    if w.shape != (B, n_steps + 1, d):
        raise ValueError(f"w has shape {w.shape}, expected ({B}, n+1, {d})")
    if kind in ("rlmc", "prlmc"):
        if dw_tau is None or tau is None:
            raise ValueError(f"{kind} needs dw_tau and tau")
        if dw_tau.shape != (B, n_steps, d) or tau.shape != (B, n_steps):
            raise ValueError("dw_tau/tau shapes do not match the batch")
    else:
        dw_tau = np.empty((B, 0, d))
        tau = np.empty((B, 0))

    p1 = p2 = acoord = 0.0
    if spec.kernel_id == KERNEL_MIXTURE:
        acoord = spec.kernel_params[0] / math.sqrt(d)
    elif spec.kernel_params:
        p1, p2 = spec.kernel_params

    radius = projection_radius(theta, spec.constants.gamma, d, h) if kind == "prlmc" else 0.0
    rec = _EMPTY_STEPS if record_steps is None else np.asarray(record_steps, dtype=np.int64)

    final, diverged, steps_done, snaps = _core.run_batch_core(
        _KIND_CODES[kind], spec.kernel_id, p1, p2, acoord,
        x0, float(h),
        np.asarray(w, dtype=float),
        np.asarray(dw_tau, dtype=float),
        np.asarray(tau, dtype=float),
        radius, float(blowup), rec,
    )
    return BatchResult(
        final=final,
        diverged=diverged,
        steps_done=steps_done,
        snapshots=snaps,
        record_steps=None if record_steps is None else rec,
    )
