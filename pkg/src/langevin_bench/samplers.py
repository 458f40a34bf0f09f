"""Discretization kernels: plain, randomized-midpoint and projected chains.

All kernels consume the drift as grad U and negate internally, so a single
gradient interface serves every scheme.  One step at stepsize h reads

    lmc:    x' = x - grad U(x) h + sqrt(2) dW
    rlmc:   y  = x - grad U(x) tau h + sqrt(2) dW_tau
            x' = x - grad U(y) h + sqrt(2) dW
    prlmc:  y  = x + F(T(x)) tau h + sqrt(2) dW_tau        (F = -grad U)
            x' = T(x) + F(T(y)) h + sqrt(2) dW

where T clips its argument onto the ball of radius
theta d^(1/(2 gamma + 2)) h^(-1/(2 gamma + 2)), taming superlinear drifts.
dW and dW_tau must come from the same path (see the noise module); tau is
drawn once per step and reused by both stages, never resampled.

The step functions are pure; `run_chain` drives one chain against a path
and its tau stream, flagging (not raising) divergence the first time the
iterate leaves the blow-up ball.  For batch workloads use the engines
subpackage, which implements the identical recursions vectorized.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import noise, theory
from .errors import DimensionMismatchError, MissingConstantError, StepsizeGuardError
from .potentials import PotentialSpec

__all__ = [
    "ChainState",
    "ProjectionParams",
    "TrajectorySummary",
    "lmc_step",
    "rlmc_step",
    "prlmc_step",
    "project",
    "projection_radius",
    "run_chain",
    "SAMPLER_KINDS",
    "DEFAULT_BLOWUP",
]

logger = logging.getLogger(__name__)

SAMPLER_KINDS = ("lmc", "rlmc", "prlmc")
DEFAULT_BLOWUP = 1e6
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ChainState:
    """Sampler iterate: position, step index and stepsize (t = n h, derived)."""

    x: np.ndarray
    n: int
    h: float
    diverged: bool = False

    @property
    def t(self) -> float:
        return self.n * self.h

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class ProjectionParams:
    """Clipping ball parameters: radius theta d^(1/(2g+2)) h^(-1/(2g+2))."""

    theta: float
    gamma: float
    dim: int
    h: float

    def __post_init__(self):
        if self.theta <= 0 or self.gamma <= 0 or self.dim < 1 or self.h <= 0:
            raise ValueError(
                f"projection needs theta, gamma, h > 0 and dim >= 1; got "
                f"theta={self.theta}, gamma={self.gamma}, dim={self.dim}, h={self.h}"
            )

    @property
    def radius(self) -> float:
        return projection_radius(self.theta, self.gamma, self.dim, self.h)


def projection_radius(theta: float, gamma: float, dim: int, h: float) -> float:
    e = 1.0 / (2.0 * gamma + 2.0)
    return theta * dim**e * h**-e


def project(x: np.ndarray, p: ProjectionParams) -> np.ndarray:
    """Clip x onto the ball of radius p.radius; the origin maps to itself."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)
    if r == 0.0:
        return np.zeros_like(x)
    scale = min(1.0, p.radius / r)
    return x if scale == 1.0 else x * scale


def _advance(state: ChainState, x_new: np.ndarray, blowup: float) -> ChainState:
    norm = float(np.linalg.norm(x_new))
    diverged = not math.isfinite(norm) or norm > blowup
    return ChainState(x=x_new, n=state.n + 1, h=state.h, diverged=diverged)


def lmc_step(
    spec: PotentialSpec, state: ChainState, dW: np.ndarray, blowup: float = DEFAULT_BLOWUP
) -> ChainState:
    """One Euler step of the overdamped dynamics driven by dW over [t, t+h]."""
    if len(dW) != spec.dim:
        raise DimensionMismatchError(f"dW has length {len(dW)}, expected {spec.dim}")
    x_new = state.x - spec.grad(state.x) * state.h + SQRT2 * np.asarray(dW)
    return _advance(state, x_new, blowup)


def rlmc_step(
    spec: PotentialSpec,
    state: ChainState,
    tau: float,
    dW_tau: np.ndarray,
    dW: np.ndarray,
    blowup: float = DEFAULT_BLOWUP,
) -> ChainState:
    """One randomized-midpoint step: predictor at the random time t + tau h,
    corrector using the predictor's gradient over the full step."""
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    h = state.h
    y = state.x - spec.grad(state.x) * (tau * h) + SQRT2 * np.asarray(dW_tau)
    x_new = state.x - spec.grad(y) * h + SQRT2 * np.asarray(dW)
    return _advance(state, x_new, blowup)


def prlmc_step(
    spec: PotentialSpec,
    state: ChainState,
    tau: float,
    dW_tau: np.ndarray,
    dW: np.ndarray,
    p: ProjectionParams,
    blowup: float = DEFAULT_BLOWUP,
) -> ChainState:
    """One projected randomized-midpoint step (superlinear-drift regime).

    Every gradient argument and the corrector's base point pass through the
    clipping map, which keeps the chain's moments bounded for any h in the
    admissible range.
    """
    if spec.constants.regime != "polynomial":
        raise MissingConstantError(
            "the projected scheme targets the polynomial-growth regime; "
            f"{spec.name} declares gradient-Lipschitz constants"
        )
    if p.h != state.h or p.dim != spec.dim:
        raise ValueError("projection parameters must match the chain's h and dim")
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must lie in [0, 1), got {tau}")
    h = state.h
    tx = project(state.x, p)
    y = state.x - spec.grad(tx) * (tau * h) + SQRT2 * np.asarray(dW_tau)
    x_new = tx - spec.grad(project(y, p)) * h + SQRT2 * np.asarray(dW)
    return _advance(state, x_new, blowup)


@dataclass(frozen=True)
class TrajectorySummary:
    """Result of run_chain: final state plus the recorded schedule."""

    final: ChainState
    snapshot_steps: np.ndarray
    snapshots: np.ndarray  # (len(snapshot_steps), dim)
    diverged: bool
    diverged_at: Optional[int] = None

    @property
    def snapshot_times(self) -> np.ndarray:
        return self.snapshot_steps * self.final.h


def _record_schedule(n_steps: int, record) -> np.ndarray:
    """Steps to record: 'final', 'full', or every-k (int); default every
    ceil(n_steps / 100).  Step 0 and the final step are always included."""
    if n_steps == 0:
        return np.array([0])
    if record == "final":
        return np.array([0, n_steps])
    if record == "full":
        k = 1
    elif record is None:
        k = max(1, math.ceil(n_steps / 100))
    elif isinstance(record, int) and record >= 1:
        k = record
    else:
        raise ValueError(f"record must be 'final', 'full' or a positive int, got {record!r}")
    steps = np.arange(0, n_steps + 1, k)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def run_chain(
    kind: str,
    spec: PotentialSpec,
    x0: np.ndarray,
    h: float,
    n_steps: int,
    path: noise.BrownianPath,
    tau_stream: Optional[noise.TauStream] = None,
    record=None,
    theta: float = 1.0,
    blowup: float = DEFAULT_BLOWUP,
    force: bool = False,
) -> TrajectorySummary:
    """Drive one chain for n_steps of size h along the given path.

    The stepsize is checked against the scheme's admissible cap unless
    ``force``; randomized kinds draw tau_n from ``tau_stream`` and read the
    matching quantized sub-increment from the path.  Iteration stops at the
    first diverged state (|x| beyond ``blowup`` or non-finite), which is
    flagged on the summary, never raised.
    """
    if kind not in SAMPLER_KINDS:
        raise ValueError(f"kind must be one of {SAMPLER_KINDS}, got {kind!r}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise DimensionMismatchError(f"x0 has shape {x0.shape}, expected ({spec.dim},)")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if n_steps * h > path.horizon + 1e-12:
        raise ValueError(
            f"chain needs horizon {n_steps * h}, path only covers {path.horizon}"
        )
    try:
        cap = theory.stepsize_guard(kind, spec)
    except MissingConstantError:
        cap = None
    if cap is not None and h > cap:
        if not force:
            raise StepsizeGuardError(
                f"h={h} exceeds the admissible stepsize {cap:.6g} for {kind} on "
                f"{spec.name}; pass force=True to run anyway"
            )
        logger.warning("running %s at h=%g above the admissible cap %g", kind, h, cap)
    if kind in ("rlmc", "prlmc") and tau_stream is None:
        raise ValueError(f"{kind} needs a tau stream")

    p = (
        ProjectionParams(theta=theta, gamma=spec.constants.gamma, dim=spec.dim, h=h)
        if kind == "prlmc"
        else None
    )
    steps_to_record = _record_schedule(n_steps, record)
    record_set = set(int(s) for s in steps_to_record)
    snaps = [x0.copy()] if 0 in record_set else []

    state = ChainState(x=x0.copy(), n=0, h=h)
    diverged_at = None
    for n in range(n_steps):
        dW = noise.coarse_increment(path, n, h)
        if kind == "lmc":
            state = lmc_step(spec, state, dW, blowup=blowup)
        else:
            tau = noise.draw_tau(tau_stream, n + 1)
            tau_q, dW_tau = noise.sub_increment(path, n, h, tau)
            if kind == "rlmc":
                state = rlmc_step(spec, state, tau_q, dW_tau, dW, blowup=blowup)
            else:
                state = prlmc_step(spec, state, tau_q, dW_tau, dW, p, blowup=blowup)
        if state.n in record_set:
            snaps.append(np.array(state.x, copy=True))
        if state.diverged:
            diverged_at = state.n
            break

    if diverged_at is not None:
        steps_to_record = steps_to_record[steps_to_record <= diverged_at]
        if steps_to_record.size == 0 or steps_to_record[-1] != diverged_at:
            steps_to_record = np.append(steps_to_record, diverged_at)
            snaps.append(np.array(state.x, copy=True))
    return TrajectorySummary(
        final=state,
        snapshot_steps=steps_to_record,
        snapshots=np.array(snaps) if snaps else np.empty((0, spec.dim)),
        diverged=state.diverged,
        diverged_at=diverged_at,
    )
