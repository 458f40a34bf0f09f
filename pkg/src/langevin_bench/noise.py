"""Reproducible Brownian paths and the uniform randomization stream.

Every random quantity in the package is addressed, never stored: a path is
identified by ``(seed, sample_index)`` and regenerated on demand from a
counter-based Philox stream, so distinct paths can be produced on different
workers with no coordination and replay is bit-identical.

Streams are split by a small ``purpose`` tag folded into the Philox counter
prefix, giving structurally independent sources from one key:

* ``W``       fine Brownian increments on the grid {k * h_ref}
* ``TAU``     the per-step uniform randomization variables of the sampler
* ``REF_TAU`` the reference integrator's own randomization variables
* ``BRIDGE``  sub-grid refinement noise used only by the reference solver
* ``X0``      randomized chain starts

A coarse chain at stepsize h = r * h_ref reads sums of fine increments, so
a scheme and its fine-grid reference share one realization of the driving
noise exactly (common random numbers).  The sampler's intermediate time
tau * h is quantized to the fine grid; with the guard r >= 16 the
quantization error |tau_q - tau| never exceeds 1/16.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridAlignmentError, MemoryBudgetError, QuantizationGuardError

__all__ = [
    "BrownianPath",
    "TauStream",
    "make_path",
    "make_tau_stream",
    "coarse_increment",
    "sub_increment",
    "draw_tau",
    "quantize_tau",
    "PURPOSE_W",
    "PURPOSE_TAU",
    "PURPOSE_REF_TAU",
    "PURPOSE_BRIDGE",
    "PURPOSE_X0",
    "DEFAULT_PATH_BUDGET_BYTES",
    "MIN_SUBSTEP_RATIO",
]

PURPOSE_W = 0
PURPOSE_TAU = 1
PURPOSE_REF_TAU = 2
PURPOSE_BRIDGE = 3
PURPOSE_X0 = 4

DEFAULT_PATH_BUDGET_BYTES = 512 * 1024 * 1024
MIN_SUBSTEP_RATIO = 16

_BLOCK = 1 << 14  # fine steps generated per keyed block
_TAU_CHUNK = 1 << 12


def keyed_generator(seed: int, sample_index: int, purpose: int, block: int = 0) -> np.random.Generator:
    """Philox generator for one (seed, sample_index, purpose, block) cell.

    The 128-bit key carries (seed, sample_index); purpose and block live in
    the high counter words, so all cells of one key are non-overlapping
    slices of a single Philox stream.
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")
    if not 0 <= sample_index < 2**64:
        raise ValueError("sample_index must fit in 64 bits")
    key = (int(seed) << 64) | int(sample_index)
    counter = ((int(block) << 3) | int(purpose)) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _increment_block(seed: int, sample_index: int, dim: int, h_ref: float, block: int, length: int) -> np.ndarray:
    gen = keyed_generator(seed, sample_index, PURPOSE_W, block)
    out = gen.standard_normal((length, dim))
    out *= np.sqrt(h_ref)
    return out


@dataclass
class BrownianPath:
    """One sample path's fine-grid increments, seed-addressed and replayable.

    ``increments[k]`` is W((k+1) h_ref) - W(k h_ref); each coordinate is
    N(0, h_ref).  Paths under the memory budget hold the full array; larger
    paths fall back to streaming block access (window sums still work, but
    the full array is refused).  Value-like and immutable once created.
    """

    seed: int
    sample_index: int
    dim: int
    h_ref: float
    n_fine: int
    _eager: Optional[np.ndarray] = field(default=None, repr=False)
    _cumsum: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def horizon(self) -> float:
        return self.n_fine * self.h_ref

    @property
    def is_streaming(self) -> bool:
        return self._eager is None

    @property
    def increments(self) -> np.ndarray:
        if self._eager is None:
            raise MemoryBudgetError(
                f"path of {self.n_fine} x {self.dim} fine increments exceeds the "
                "memory budget; use window sums (streaming mode) instead"
            )
        return self._eager

    def prefix(self) -> np.ndarray:
        """Cumulative path W at grid times, shape (n_fine + 1, dim); W[0] = 0."""
        if self._cumsum is None:
            w = np.zeros((self.n_fine + 1, self.dim))
            np.cumsum(self.increments, axis=0, out=w[1:])
            object.__setattr__(self, "_cumsum", w)
        return self._cumsum

    def window_sum(self, k0: int, k1: int) -> np.ndarray:
        """Sum of fine increments over [k0, k1), i.e. W(k1 h_ref) - W(k0 h_ref)."""
        if not 0 <= k0 <= k1 <= self.n_fine:
            raise GridAlignmentError(f"window [{k0}, {k1}) outside path of {self.n_fine} steps")
        if k1 - k0 == 1 and not self.is_streaming:
            # exact fine increment, bitwise: ratio-1 chains must couple exactly
            return self._eager[k0].copy()
        if not self.is_streaming:
            w = self.prefix()
            return w[k1] - w[k0]
        out = np.zeros(self.dim)
        b = k0 // _BLOCK
        while b * _BLOCK < k1:
            lo = max(k0, b * _BLOCK)
            hi = min(k1, (b + 1) * _BLOCK)
            length = min(_BLOCK, self.n_fine - b * _BLOCK)
            blk = _increment_block(self.seed, self.sample_index, self.dim, self.h_ref, b, length)
            out += blk[lo - b * _BLOCK : hi - b * _BLOCK].sum(axis=0)
            b += 1
        return out


def make_path(
    seed: int,
    sample_index: int,
    dim: int,
    horizon: float,
    h_ref: float,
    budget_bytes: int = DEFAULT_PATH_BUDGET_BYTES,
    allow_streaming: bool = True,
) -> BrownianPath:
    """Realize the Brownian path for one sample on the fine grid.

    The horizon must be an integral number of fine steps.  Paths whose full
    increment array would exceed ``budget_bytes`` are returned in streaming
    mode (or refused if ``allow_streaming`` is false).
    """
    if horizon <= 0 or h_ref <= 0:
        raise GridAlignmentError("horizon and h_ref must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n_float = horizon / h_ref
    n_fine = int(round(n_float))
    if n_fine < 1 or abs(n_float - n_fine) > 1e-9 * max(1.0, n_float):
        raise GridAlignmentError(
            f"horizon {horizon} is not an integral multiple of h_ref {h_ref}"
        )
    eager = None
    if n_fine * dim * 8 <= budget_bytes:
        blocks = [
            _increment_block(seed, sample_index, dim, h_ref, b, min(_BLOCK, n_fine - b * _BLOCK))
            for b in range((n_fine + _BLOCK - 1) // _BLOCK)
        ]
        eager = blocks[0] if len(blocks) == 1 else np.concatenate(blocks, axis=0)
    elif not allow_streaming:
        raise MemoryBudgetError(
            f"path needs {n_fine * dim * 8} bytes > budget {budget_bytes}"
        )
    return BrownianPath(
        seed=int(seed), sample_index=int(sample_index), dim=dim,
        h_ref=float(h_ref), n_fine=n_fine, _eager=eager,
    )


def _step_ratio(path: BrownianPath, h: float) -> int:
    ratio_f = h / path.h_ref
    ratio = int(round(ratio_f))
    if ratio < 1 or abs(ratio_f - ratio) > 1e-9 * ratio_f:
        raise GridAlignmentError(
            f"coarse step {h} is not an integral multiple of h_ref {path.h_ref}"
        )
    return ratio


def coarse_increment(path: BrownianPath, n: int, h: float) -> np.ndarray:
    """Brownian increment of coarse step n: W((n+1) h) - W(n h)."""
    ratio = _step_ratio(path, h)
    if (n + 1) * ratio > path.n_fine:
        raise GridAlignmentError(
            f"coarse step {n} at h={h} exceeds the path horizon {path.horizon}"
        )
    return path.window_sum(n * ratio, (n + 1) * ratio)


def quantize_tau(tau: float, ratio: int) -> tuple[float, int]:
    """Snap tau in (0,1) to the fine grid: m = round(tau * ratio), clamped
    so the sub-increment covers at least one and at most ratio-1 fine steps."""
    m = int(round(tau * ratio))
    m = min(max(m, 1), ratio - 1)
    return m / ratio, m


def sub_increment(
    path: BrownianPath, n: int, h: float, tau: float, force: bool = False
) -> tuple[float, np.ndarray]:
    """Brownian sub-increment W(n h + tau_q h) - W(n h) of coarse step n.

    tau is quantized to the fine grid (tau_q = m / ratio); the guard
    ratio >= 16 keeps |tau_q - tau| <= 1/16 and can only be lifted
    explicitly via ``force``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    ratio = _step_ratio(path, h)
    if ratio < MIN_SUBSTEP_RATIO and not force:
        raise QuantizationGuardError(
            f"h / h_ref = {ratio} < {MIN_SUBSTEP_RATIO}: tau quantization too coarse "
            "(pass force=True to override)"
        )
    if ratio < 2:
        raise QuantizationGuardError("sub-increments need h >= 2 * h_ref")
    if (n + 1) * ratio > path.n_fine:
        raise GridAlignmentError(f"coarse step {n} at h={h} exceeds the path horizon")
    tau_q, m = quantize_tau(tau, ratio)
    return tau_q, path.window_sum(n * ratio, n * ratio + m)


@dataclass
class TauStream:
    """The i.i.d. U(0,1) randomization variables tau_1, tau_2, ...

    Drawn from a purpose-separated slice of the path's Philox key, so the
    stream is independent of the Brownian increments by construction.
    Values are (k + 1/2) / 2^53 for a 53-bit draw k, hence strictly inside
    (0, 1).
    """

    seed: int
    sample_index: int
    purpose: int = PURPOSE_TAU
    _chunks: dict = field(default_factory=dict, repr=False)

    def _chunk(self, c: int) -> np.ndarray:
        if c not in self._chunks:
            gen = keyed_generator(self.seed, self.sample_index, self.purpose, block=c)
            raw = gen.integers(0, 1 << 53, size=_TAU_CHUNK, dtype=np.int64)
            self._chunks[c] = (raw + 0.5) / float(1 << 53)
        return self._chunks[c]

    def values(self, count: int) -> np.ndarray:
        """tau_1 .. tau_count as an array."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        chunks = [self._chunk(c) for c in range((count + _TAU_CHUNK - 1) // _TAU_CHUNK)]
        return np.concatenate(chunks)[:count] if chunks else np.empty(0)


def make_tau_stream(seed: int, sample_index: int, purpose: int = PURPOSE_TAU) -> TauStream:
    return TauStream(seed=int(seed), sample_index=int(sample_index), purpose=purpose)


def draw_tau(stream: TauStream, n: int) -> float:
    """The n-th randomization variable tau_n (n >= 1), deterministic per key."""
    if n < 1:
        raise ValueError(f"tau index starts at 1, got {n}")
    idx = n - 1
    return float(stream._chunk(idx // _TAU_CHUNK)[idx % _TAU_CHUNK])
