"""Vectorized batch stepping in pure NumPy.

Chains are advanced in drift-integrated form: the state is carried as
z_n = x_n - sqrt(2) W(t_n), with positions reconstructed from the shared
Brownian prefix array when a gradient is needed.  The Brownian part then
telescopes without rounding, so a scheme and its fine-grid reference on
the same path agree exactly whenever they should (zero drift, or identical
grids), which the coupled error estimators rely on.

Diverged rows (|x| beyond the blow-up threshold, or non-finite) are frozen
at their first bad value and zeroed internally so the remaining rows keep
stepping without overflow noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..potentials import PotentialSpec
from ..samplers import projection_radius

__all__ = ["run_batch", "BatchResult", "NAME"]

NAME = "numpy"
SQRT2 = math.sqrt(2.0)


@dataclass
class BatchResult:
    final: np.ndarray  # (B, d) positions after the last step (frozen rows keep their first bad value)
    diverged: np.ndarray  # (B,) bool
    steps_done: np.ndarray  # (B,) steps completed before freezing (== n_steps if healthy)
    snapshots: Optional[np.ndarray]  # (K, B, d) positions at record_steps, or None
    record_steps: Optional[np.ndarray]


def _project_rows(x: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Clip rows onto the ball; rows already inside pass through bitwise."""
    norms = np.linalg.norm(x, axis=1)
    shrunk = norms > radius
    if not shrunk.any():
        return x, shrunk
    out = x.copy()
    out[shrunk] *= (radius / norms[shrunk])[:, None]
    return out, shrunk


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
    """Advance a batch of chains n_steps = w.shape[1] - 1 times.

    w holds the driving Brownian path at the scheme's step times,
    w[:, j] = W(j h) (unscaled); randomized kinds additionally need the
    per-step sub-increments dw_tau[:, n] = W(n h + tau_n h) - W(n h) and
    the matching tau array.
    """
    x0 = np.asarray(x0, dtype=float)
    B, d = x0.shape
    n_steps = w.shape[1] - 1
    if w.shape != (B, n_steps + 1, d):
        raise ValueError(f"w has shape {w.shape}, expected ({B}, n+1, {d})")
    if kind not in ("lmc", "rlmc", "prlmc"):
        raise ValueError(f"unknown kind {kind!r}")
    if kind in ("rlmc", "prlmc"):
        if dw_tau is None or tau is None:
            raise ValueError(f"{kind} needs dw_tau and tau")
        if dw_tau.shape != (B, n_steps, d) or tau.shape != (B, n_steps):
            raise ValueError("dw_tau/tau shapes do not match the batch")
    radius = projection_radius(theta, spec.constants.gamma, d, h) if kind == "prlmc" else 0.0

    grad = spec.grad
    z = x0 - SQRT2 * w[:, 0]
    alive = np.ones(B, dtype=bool)
    frozen_x = np.zeros((B, d))
    steps_done = np.full(B, n_steps, dtype=np.int64)

    rec = None
    rec_pos = 0
    if record_steps is not None:
        record_steps = np.asarray(record_steps, dtype=np.int64)
        rec = np.empty((len(record_steps), B, d))

    def snapshot(step: int, x_now: np.ndarray):
        nonlocal rec_pos
        while rec is not None and rec_pos < len(record_steps) and record_steps[rec_pos] == step:
            rec[rec_pos] = np.where(alive[:, None], x_now, frozen_x)
            rec_pos += 1

    x = z + SQRT2 * w[:, 0]
    snapshot(0, x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n in range(n_steps):
            x = z + SQRT2 * w[:, n]
            if kind == "lmc":
                z = z - grad(x) * h
            elif kind == "rlmc":
                y = x - grad(x) * (tau[:, n, None] * h) + SQRT2 * dw_tau[:, n]
                z = z - grad(y) * h
            else:
                tx, shrunk = _project_rows(x, radius)
                y = x - grad(tx) * (tau[:, n, None] * h) + SQRT2 * dw_tau[:, n]
                ty, _ = _project_rows(y, radius)
                if shrunk.any():
                    z = np.where(shrunk[:, None], tx - SQRT2 * w[:, n], z)
                z = z - grad(ty) * h
            x_next = z + SQRT2 * w[:, n + 1]
            norms = np.linalg.norm(x_next, axis=1)
            bad = alive & (~np.isfinite(norms) | (norms > blowup))
            if bad.any():
                frozen_x[bad] = x_next[bad]
                steps_done[bad] = n + 1
                alive &= ~bad
                z = np.where(alive[:, None], z, 0.0)
                x_next = np.where(alive[:, None], x_next, 0.0)
            snapshot(n + 1, x_next)

    final = np.where(alive[:, None], z + SQRT2 * w[:, n_steps], frozen_x)
    return BatchResult(
        final=final,
        diverged=~alive,
        steps_done=steps_done,
        snapshots=rec,
        record_steps=record_steps,
    )
