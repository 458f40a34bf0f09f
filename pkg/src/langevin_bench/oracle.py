"""Fine-grid reference solutions and coupled error estimation.

The continuous dynamics dX = -grad U(X) dt + sqrt(2) dW has no closed-form
solution, so the "exact" endpoint is produced by stepping at the fine
resolution h_ref on the same Brownian path the coarse scheme reads:

* gradient-Lipschitz regime: plain Euler at h_ref (for additive noise this
  is already strong order one, two grid levels below any coarse h);
* polynomial-growth regime: the projected randomized scheme at h_ref, with
  its own randomization stream.  Plain Euler can still explode for
  superlinear drifts, while the projected chain is moment-bounded.

The projected reference needs Brownian values below the grid: inside fine
cell k it refines the stored increment by bridge conditioning,
W(t + tau h_ref) - W(t) = tau dW_k + sqrt(tau (1 - tau) h_ref) xi_k, with
xi_k from a dedicated stream.  Cell totals are preserved, so the coarse
scheme and the reference still share one Brownian motion exactly.

Because both legs run through the same drift-integrated engine on shared
prefix arrays, disabling the drift makes their endpoints cancel to the
bit, and an estimate at h = h_ref is exactly zero for the plain scheme.

Sample paths are processed in fixed-size batches and merged in
sample-index order; results are independent of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import engines, noise, theory
from .errors import (
    DimensionMismatchError,
    DivergedReferenceError,
    GridAlignmentError,
    MissingConstantError,
)
from .potentials import PotentialSpec
from .samplers import DEFAULT_BLOWUP

__all__ = [
    "CoupledErrorEstimate",
    "OneStepEstimate",
    "HolderRow",
    "ChainEnsemble",
    "reference_solve",
    "coupled_error",
    "one_step_error",
    "holder_check",
    "sample_chains",
    "REFERENCE_BLOWUP",
]

Z95 = 1.959963984540054
DEFAULT_BATCH = 32
REFERENCE_BLOWUP = 1e8
_MOMENT_SUB_RATIO = 16  # fine steps per coarse step when no reference is coupled


# ---------------------------------------------------------------------------
# batched noise plumbing (bitwise-consistent with the scalar noise module)
# ---------------------------------------------------------------------------


def _prefix_batch(seed: int, indices: Sequence[int], dim: int, n_fine: int, h_ref: float) -> np.ndarray:
    """Brownian prefix W on the fine grid for a batch of paths: (B, n_fine+1, d)."""
    out = np.empty((len(indices), n_fine + 1, dim))
    out[:, 0] = 0.0
    block = 1 << 14
    for i, si in enumerate(indices):
        for b in range((n_fine + block - 1) // block):
            length = min(block, n_fine - b * block)
            out[i, 1 + b * block : 1 + b * block + length] = noise._increment_block(
                seed, si, dim, h_ref, b, length
            )
    np.cumsum(out, axis=1, out=out)
    return out


def _taus_batch(seed: int, indices: Sequence[int], count: int, purpose: int) -> np.ndarray:
    out = np.empty((len(indices), count))
    for i, si in enumerate(indices):
        out[i] = noise.TauStream(seed=seed, sample_index=si, purpose=purpose).values(count)
    return out


def _bridge_batch(seed: int, indices: Sequence[int], n_fine: int, dim: int) -> np.ndarray:
    out = np.empty((len(indices), n_fine, dim))
    for i, si in enumerate(indices):
        gen = noise.keyed_generator(seed, si, noise.PURPOSE_BRIDGE)
        out[i] = gen.standard_normal((n_fine, dim))
    return out


def _coarse_views(wfine: np.ndarray, ratio: int, n_steps: int, m: Optional[np.ndarray]):
    """Coarse prefix view plus (optionally) the quantized sub-increments."""
    w_coarse = wfine[:, :: ratio][:, : n_steps + 1]
    if m is None:
        return w_coarse, None
    base = np.arange(n_steps, dtype=np.int64) * ratio
    idx = base[None, :] + m
    dw_tau = np.take_along_axis(wfine, idx[:, :, None], axis=1) - wfine[:, base]
    return w_coarse, dw_tau


def _reference_batch(
    spec: PotentialSpec,
    wfine: np.ndarray,
    seed: int,
    indices: Sequence[int],
    h_ref: float,
    x0: np.ndarray,
    theta: float,
    engine,
    record_steps: Optional[np.ndarray] = None,
    tau_ref: Optional[np.ndarray] = None,
    xi: Optional[np.ndarray] = None,
) -> engines.BatchResult:
    n_fine = wfine.shape[1] - 1
    if spec.constants.regime == "lipschitz":
        return engine.run_batch(
            "lmc", spec, x0, h_ref, wfine, blowup=REFERENCE_BLOWUP, record_steps=record_steps
        )
    if tau_ref is None:
        tau_ref = _taus_batch(seed, indices, n_fine, noise.PURPOSE_REF_TAU)
    if xi is None:
        xi = _bridge_batch(seed, indices, n_fine, wfine.shape[2])
    inc = np.diff(wfine, axis=1)
    dw_tau = tau_ref[:, :, None] * inc
    dw_tau += np.sqrt(tau_ref * (1.0 - tau_ref) * h_ref)[:, :, None] * xi
    return engine.run_batch(
        "prlmc", spec, x0, h_ref, wfine, dw_tau=dw_tau, tau=tau_ref,
        theta=theta, blowup=REFERENCE_BLOWUP, record_steps=record_steps,
    )


def _check_grid(h: float, h_ref: float, horizon: float, dyadic: bool = True) -> tuple[int, int]:
    ratio_f = h / h_ref
    ratio = int(round(ratio_f))
    if ratio < 1 or abs(ratio_f - ratio) > 1e-9 * ratio_f:
        raise GridAlignmentError(f"h={h} is not an integral multiple of h_ref={h_ref}")
    if dyadic and ratio & (ratio - 1):
        raise GridAlignmentError(f"h / h_ref = {ratio} must be a power of two")
    n_f = horizon / h
    n_steps = int(round(n_f))
    if n_steps < 1 or abs(n_f - n_steps) > 1e-9 * n_f:
        raise GridAlignmentError(f"horizon {horizon} is not an integral multiple of h={h}")
    return ratio, n_steps


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def reference_solve(
    spec: PotentialSpec,
    path: noise.BrownianPath,
    x0: np.ndarray,
    horizon: float,
    theta: float = 1.0,
    engine_name: Optional[str] = None,
) -> np.ndarray:
    """Endpoint of the fine-grid reference solution on one path."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise DimensionMismatchError(f"x0 has shape {x0.shape}, expected ({spec.dim},)")
    n_ref = int(round(horizon / path.h_ref))
    if n_ref < 1 or abs(horizon / path.h_ref - n_ref) > 1e-9 * n_ref:
        raise GridAlignmentError("horizon must be an integral number of fine steps")
    if n_ref > path.n_fine:
        raise GridAlignmentError(f"path horizon {path.horizon} is shorter than {horizon}")
    wfine = path.prefix()[None, : n_ref + 1]
    engine = engines.engine_for(spec, engine_name)
    res = _reference_batch(
        spec, wfine, path.seed, [path.sample_index], path.h_ref, x0[None, :], theta, engine
    )
    if res.diverged[0]:
        raise DivergedReferenceError(
            f"reference solution diverged on path (seed={path.seed}, "
            f"sample_index={path.sample_index}); check the configuration"
        )
    return res.final[0]


@dataclass(frozen=True)
class CoupledErrorEstimate:
    """Pathwise endpoint error of the coarse scheme against the reference."""

    kind: str
    h: float
    h_ref: float
    horizon: float
    dim: int
    samples: int
    mse: float
    ci_half_width: float
    weak_bias: float
    weak_ci: float
    diverged_coarse: int

    @property
    def rms(self) -> float:
        return math.sqrt(self.mse)


def coupled_error(
    kind: str,
    spec: PotentialSpec,
    h: float,
    h_ref: float,
    horizon: float,
    samples: int,
    seed: int,
    theta: float = 1.0,
    blowup: float = DEFAULT_BLOWUP,
    batch_size: int = DEFAULT_BATCH,
    jobs: int = 1,
    engine_name: Optional[str] = None,
    x0: Optional[np.ndarray] = None,
) -> CoupledErrorEstimate:
    """Mean-square endpoint error over coupled paths.

    For each sample index, realizes one Brownian path, runs the coarse
    scheme and the fine-grid reference on that same path (both from x0,
    default the origin), and aggregates |X_T - Y_T|^2 and the mean
    difference.  A diverged reference aborts the estimate; diverged coarse
    chains are excluded and counted.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples for a CI")
    if kind not in ("lmc", "rlmc", "prlmc"):
        raise ValueError(f"unknown kind {kind!r}")
    if kind == "prlmc" and spec.constants.regime != "polynomial":
        raise MissingConstantError("the projected scheme needs the polynomial regime")
    ratio, n_steps = _check_grid(h, h_ref, horizon)
    randomized = kind in ("rlmc", "prlmc")
    if randomized and ratio < noise.MIN_SUBSTEP_RATIO:
        raise GridAlignmentError(
            f"randomized schemes need h / h_ref >= {noise.MIN_SUBSTEP_RATIO}, got {ratio}"
        )
    n_fine = n_steps * ratio
    d = spec.dim
    engine = engines.engine_for(spec, engine_name)
    start = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    if start.shape != (d,):
        raise DimensionMismatchError(f"x0 has shape {start.shape}, expected ({d},)")

    diffs = np.empty((samples, d))
    coarse_dead = np.zeros(samples, dtype=bool)
    ref_dead = np.zeros(samples, dtype=bool)

    def one_batch(lo: int):
        hi = min(lo + batch_size, samples)
        indices = range(lo, hi)
        wfine = _prefix_batch(seed, indices, d, n_fine, h_ref)
        x0 = np.broadcast_to(start, (hi - lo, d)).copy()
        ref = _reference_batch(spec, wfine, seed, indices, h_ref, x0, theta, engine)
        if randomized:
            taus = _taus_batch(seed, indices, n_steps, noise.PURPOSE_TAU)
            m = np.clip(np.round(taus * ratio).astype(np.int64), 1, ratio - 1)
            tau_q = m / float(ratio)
            w_coarse, dw_tau = _coarse_views(wfine, ratio, n_steps, m)
            coarse = engine.run_batch(
                kind, spec, x0, h, w_coarse, dw_tau=dw_tau, tau=tau_q,
                theta=theta, blowup=blowup,
            )
        else:
            w_coarse, _ = _coarse_views(wfine, ratio, n_steps, None)
            coarse = engine.run_batch(kind, spec, x0, h, w_coarse, blowup=blowup)
        diffs[lo:hi] = ref.final - coarse.final
        coarse_dead[lo:hi] = coarse.diverged
        ref_dead[lo:hi] = ref.diverged

    starts = list(range(0, samples, batch_size))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(one_batch, starts))
    else:
        for lo in starts:
            one_batch(lo)

    if ref_dead.any():
        raise DivergedReferenceError(
            f"reference diverged on {int(ref_dead.sum())} of {samples} paths "
            f"(first sample_index {int(np.argmax(ref_dead))})"
        )
    valid = ~coarse_dead
    n_valid = int(valid.sum())
    if n_valid < 2:
        raise DivergedReferenceError("fewer than 2 coarse chains survived; estimate void")
    dv = diffs[valid]
    sq = np.einsum("ij,ij->i", dv, dv)
    mse = float(sq.mean())
    ci = Z95 * float(sq.std(ddof=1)) / math.sqrt(n_valid)
    mean_vec = dv.mean(axis=0)
    weak = float(np.linalg.norm(mean_vec))
    weak_ci = Z95 * math.sqrt(float(dv.var(axis=0, ddof=1).sum()) / n_valid)
    return CoupledErrorEstimate(
        kind=kind, h=h, h_ref=h_ref, horizon=horizon, dim=d,
        samples=n_valid, mse=mse, ci_half_width=ci,
        weak_bias=weak, weak_ci=weak_ci, diverged_coarse=int(coarse_dead.sum()),
    )


@dataclass(frozen=True)
class OneStepEstimate:
    kind: str
    h: float
    h_ref: float
    samples: int
    strong_rms: float
    strong_rms_ci: float
    weak_bias: float
    weak_ci: float


def one_step_error(
    kind: str,
    spec: PotentialSpec,
    x: np.ndarray,
    h: float,
    samples: int,
    seed: int,
    theta: float = 1.0,
    batch_size: int = 4096,
    engine_name: Optional[str] = None,
) -> OneStepEstimate:
    """Strong and weak error of a single step from a fixed point.

    The reference integrates the same Brownian path at h_ref = h / 1024.
    Draws come in antithetic quadruples over (path sign, tau reflection):
    negating every Gaussian source at fixed tau cancels the coupled
    difference's odd-order noise, and reflecting tau across the legs
    cancels the surviving randomization fluctuation.  Every leg is exactly
    distributed, so the estimates stay unbiased; without the reduction the
    weak bias (one order below the strong error) drowns in Monte Carlo
    noise at any affordable sample size.  CIs are computed over the
    independent quadruple averages.  samples must be at least 10^4
    (rounded up to a multiple of four).
    """
    if samples < 10_000:
        raise ValueError("one-step error estimation needs at least 10^4 samples")
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise DimensionMismatchError(f"x has shape {x.shape}, expected ({spec.dim},)")
    ratio = 1024
    h_ref = h / ratio
    d = spec.dim
    engine = engines.engine_for(spec, engine_name)
    quads = (samples + 3) // 4
    diffs = [np.empty((quads, d)) for _ in range(4)]
    ref_dead = np.zeros(quads, dtype=bool)
    polynomial = spec.constants.regime == "polynomial"

    for lo in range(0, quads, batch_size):
        hi = min(lo + batch_size, quads)
        indices = range(lo, hi)
        b = hi - lo
        wfine = _prefix_batch(seed, indices, d, ratio, h_ref)
        x0 = np.broadcast_to(x, (b, d)).copy()
        tau_ref = _taus_batch(seed, indices, ratio, noise.PURPOSE_REF_TAU) if polynomial else None
        xi = _bridge_batch(seed, indices, ratio, d) if polynomial else None
        taus = _taus_batch(seed, indices, 1, noise.PURPOSE_TAU) if kind != "lmc" else None
        for leg, (w_sign, t_flip) in enumerate(
            ((1.0, False), (-1.0, False), (1.0, True), (-1.0, True))
        ):
            wf = wfine if w_sign > 0 else -wfine
            tr = tau_ref if (tau_ref is None or w_sign > 0) else 1.0 - tau_ref
            xb = xi if (xi is None or w_sign > 0) else -xi
            ref = _reference_batch(
                spec, wf, seed, indices, h_ref, x0, theta, engine, tau_ref=tr, xi=xb
            )
            w_coarse = wf[:, [0, ratio]]
            if kind == "lmc":
                coarse = engine.run_batch(kind, spec, x0, h, w_coarse, blowup=REFERENCE_BLOWUP)
            else:
                t = 1.0 - taus if t_flip else taus
                m = np.clip(np.round(t * ratio).astype(np.int64), 1, ratio - 1)
                tau_q = m / float(ratio)
                _, dw_tau = _coarse_views(wf, ratio, 1, m)
                coarse = engine.run_batch(
                    kind, spec, x0, h, w_coarse, dw_tau=dw_tau, tau=tau_q,
                    theta=theta, blowup=REFERENCE_BLOWUP,
                )
            diffs[leg][lo:hi] = ref.final - coarse.final
            ref_dead[lo:hi] |= ref.diverged

    if ref_dead.any():
        raise DivergedReferenceError(f"reference diverged on {int(ref_dead.sum())} draws")
    n_draws = 4 * quads
    sq_quad = 0.25 * sum(np.einsum("ij,ij->i", dd, dd) for dd in diffs)
    mse = float(sq_quad.mean())
    mse_ci = Z95 * float(sq_quad.std(ddof=1)) / math.sqrt(quads)
    rms = math.sqrt(mse)
    rms_ci = mse_ci / (2.0 * rms) if rms > 0 else 0.0
    quad_mean = 0.25 * sum(diffs)
    weak = float(np.linalg.norm(quad_mean.mean(axis=0)))
    weak_ci = Z95 * math.sqrt(float(quad_mean.var(axis=0, ddof=1).sum()) / quads)
    return OneStepEstimate(
        kind=kind, h=h, h_ref=h_ref, samples=n_draws,
        strong_rms=rms, strong_rms_ci=rms_ci, weak_bias=weak, weak_ci=weak_ci,
    )


@dataclass(frozen=True)
class HolderRow:
    theta: float
    moment: float
    ci_half_width: float
    bound: float


def holder_check(
    spec: PotentialSpec,
    theta_list: Sequence[float],
    horizon: float,
    samples: int,
    seed: int,
    h_ref: float = 2.0**-12,
    x0: Optional[np.ndarray] = None,
    batch_size: int = DEFAULT_BATCH,
    engine_name: Optional[str] = None,
) -> list[HolderRow]:
    """Empirical E|X_theta - X_0|^2 of the reference against the linear cap.

    The cap C theta uses the explicit constant of the Lipschitz regime at
    p = 1: C = (4 L1' + 4 m1(1) + 4) d + 4 L1 |x0|^2, with the moment cap
    m1 taken at its default free parameter c = mu.
    """
    k = spec.constants
    if k.regime != "lipschitz":
        raise MissingConstantError("the explicit increment cap needs the Lipschitz regime")
    x0 = np.zeros(spec.dim) if x0 is None else np.asarray(x0, dtype=float)
    steps = []
    for th in theta_list:
        s = int(round(th / h_ref))
        if abs(th - s * h_ref) > 1e-9 * max(th, h_ref) or th > horizon + 1e-12:
            raise GridAlignmentError(f"theta={th} not on the fine grid or beyond horizon")
        steps.append(s)
    record = np.unique(np.asarray(steps, dtype=np.int64))
    n_fine = int(round(horizon / h_ref))
    d = spec.dim
    engine = engines.engine_for(spec, engine_name)

    acc = np.zeros((len(record), samples))
    for lo in range(0, samples, batch_size):
        hi = min(lo + batch_size, samples)
        indices = range(lo, hi)
        wfine = _prefix_batch(seed, indices, d, n_fine, h_ref)
        x0b = np.broadcast_to(x0, (hi - lo, d)).copy()
        res = _reference_batch(
            spec, wfine, seed, indices, h_ref, x0b, 1.0, engine, record_steps=record
        )
        if res.diverged.any():
            raise DivergedReferenceError("reference diverged during the increment study")
        delta = res.snapshots - x0b[None, :, :]
        acc[:, lo:hi] = np.einsum("kij,kij->ki", delta, delta)

    m1_1 = theory.m1(1, k.mu, k.mu_prime, k.mu)
    L1p = k.lip_L1_prime or 0.0
    cap = (4.0 * L1p + 4.0 * m1_1 + 4.0) * d + 4.0 * k.lip_L1 * float(x0 @ x0)
    by_step = {int(s): i for i, s in enumerate(record)}
    rows = []
    for th, s in zip(theta_list, steps):
        vals = acc[by_step[s]]
        rows.append(
            HolderRow(
                theta=th,
                moment=float(vals.mean()),
                ci_half_width=Z95 * float(vals.std(ddof=1)) / math.sqrt(samples),
                bound=cap * th,
            )
        )
    return rows


@dataclass(frozen=True)
class ChainEnsemble:
    """Batch of chains driven without a coupled reference (moment studies)."""

    kind: str
    h: float
    record_steps: np.ndarray
    snapshots: np.ndarray  # (K, M, d)
    final: np.ndarray  # (M, d)
    diverged: np.ndarray  # (M,) bool
    steps_done: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.record_steps * self.h


def sample_chains(
    kind: str,
    spec: PotentialSpec,
    samples: int,
    h: float,
    n_steps: int,
    seed: int,
    x0_policy: str = "zero",
    theta: float = 1.0,
    record_every: Optional[int] = None,
    blowup: float = DEFAULT_BLOWUP,
    batch_size: int = DEFAULT_BATCH,
    jobs: int = 1,
    engine_name: Optional[str] = None,
) -> ChainEnsemble:
    """Run many independent chains of one scheme and record snapshots.

    Noise is read from the same keyed fine grid as everywhere else, at
    h_ref = h / 16 (the smallest ratio the tau quantization guard allows).
    x0_policy is ``zero``, ``gauss`` (standard normal per chain, from the
    dedicated start-value stream) or ``const:<v>``.
    """
    if kind not in ("lmc", "rlmc", "prlmc"):
        raise ValueError(f"unknown kind {kind!r}")
    d = spec.dim
    ratio = _MOMENT_SUB_RATIO
    h_ref = h / ratio
    n_fine = n_steps * ratio
    engine = engines.engine_for(spec, engine_name)
    if record_every is None:
        record_every = max(1, math.ceil(n_steps / 100))
    record = np.arange(0, n_steps + 1, record_every, dtype=np.int64)
    if record[-1] != n_steps:
        record = np.append(record, n_steps)
    randomized = kind in ("rlmc", "prlmc")

    snaps = np.empty((len(record), samples, d))
    finals = np.empty((samples, d))
    dead = np.zeros(samples, dtype=bool)
    steps_done = np.empty(samples, dtype=np.int64)

    def start_values(indices) -> np.ndarray:
        if x0_policy == "zero":
            return np.zeros((len(indices), d))
        if x0_policy == "gauss":
            out = np.empty((len(indices), d))
            for i, si in enumerate(indices):
                out[i] = noise.keyed_generator(seed, si, noise.PURPOSE_X0).standard_normal(d)
            return out
        if x0_policy.startswith("const:"):
            return np.full((len(indices), d), float(x0_policy.split(":", 1)[1]))
        raise ValueError(f"unknown x0 policy {x0_policy!r}")

    def one_batch(lo: int):
        hi = min(lo + batch_size, samples)
        indices = range(lo, hi)
        wfine = _prefix_batch(seed, indices, d, n_fine, h_ref)
        x0 = start_values(indices)
        if randomized:
            taus = _taus_batch(seed, indices, n_steps, noise.PURPOSE_TAU)
            m = np.clip(np.round(taus * ratio).astype(np.int64), 1, ratio - 1)
            tau_q = m / float(ratio)
            w_coarse, dw_tau = _coarse_views(wfine, ratio, n_steps, m)
            res = engine.run_batch(
                kind, spec, x0, h, w_coarse, dw_tau=dw_tau, tau=tau_q,
                theta=theta, blowup=blowup, record_steps=record,
            )
        else:
            w_coarse, _ = _coarse_views(wfine, ratio, n_steps, None)
            res = engine.run_batch(
                kind, spec, x0, h, w_coarse, blowup=blowup, record_steps=record
            )
        snaps[:, lo:hi] = res.snapshots
        finals[lo:hi] = res.final
        dead[lo:hi] = res.diverged
        steps_done[lo:hi] = res.steps_done

    starts = list(range(0, samples, batch_size))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(one_batch, starts))
    else:
        for lo in starts:
            one_batch(lo)

    return ChainEnsemble(
        kind=kind, h=h, record_steps=record, snapshots=snaps,
        final=finals, diverged=dead, steps_done=steps_done,
    )
