"""Error aggregation: order regression, 1-D Wasserstein-2, moment traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["OrderFit", "fit_order", "w2_1d", "second_moment_trace", "MomentTrace"]

Z95 = 1.959963984540054


@dataclass(frozen=True)
class OrderFit:
    """Least-squares slope of log err against log h."""

    slope: float
    intercept: float
    r2: float
    points: tuple

    def __str__(self):
        return f"slope={self.slope:.4f} intercept={self.intercept:.4f} r2={self.r2:.6f}"


def fit_order(points: Sequence[tuple[float, float]]) -> OrderFit:
    """Fit err ~ C h^slope through at least three (h, err) pairs.

    The fit is computed on (ln h, ln err), so rescaling err shifts only the
    intercept and the slope is the empirical convergence order.
    """
    pts = [(float(h), float(e)) for h, e in points]
    if len(pts) < 3:
        raise ValueError(f"order fit needs at least 3 points, got {len(pts)}")
    if any(h <= 0 or e <= 0 for h, e in pts):
        raise ValueError("order fit needs strictly positive stepsize and error values")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return OrderFit(slope=float(slope), intercept=float(intercept), r2=r2, points=tuple(pts))


def w2_1d(samples: np.ndarray, target_quantile: Callable[[np.ndarray], np.ndarray]) -> float:
    """Quadratic-transport distance between an empirical law and a target.

    Couples the i-th order statistic with the target quantile at
    (i - 1/2) / M:

        ( (1/M) sum_i (x_(i) - Q((i - 1/2)/M))^2 )^(1/2)

    which converges to the true W2 as M grows (in one dimension the optimal
    coupling is monotone).  The midpoint offset is preferred to i/(M+1);
    the difference is O(1/M).
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    m = samples.size
    if m == 0:
        raise ValueError("w2_1d needs at least one sample")
    u = (np.arange(m) + 0.5) / m
    q = np.asarray(target_quantile(u), dtype=float)
    if q.shape != samples.shape:
        raise ValueError("target_quantile must map (0,1)^M to M values")
    diff = samples - q
    return math.sqrt(float(diff @ diff) / m)


@dataclass(frozen=True)
class MomentTrace:
    times: np.ndarray
    mean_sq: np.ndarray
    ci_half_width: np.ndarray

    def rows(self):
        return zip(self.times, self.mean_sq, self.ci_half_width)


def second_moment_trace(snapshots: np.ndarray, times: np.ndarray) -> MomentTrace:
    """Monte Carlo E|Y_n|^2 with 95% CIs from per-time chain snapshots.

    snapshots has shape (K, M, d): K recorded times, M chains sharing the
    recording schedule.
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 3:
        raise ValueError("snapshots must be (times, chains, dim)")
    times = np.asarray(times, dtype=float)
    if times.shape != (snapshots.shape[0],):
        raise ValueError("times must match the snapshot schedule (ragged input?)")
    m = snapshots.shape[1]
    sq = np.einsum("kmd,kmd->km", snapshots, snapshots)
    mean = sq.mean(axis=1)
    ci = Z95 * sq.std(axis=1, ddof=1) / math.sqrt(m) if m > 1 else np.zeros_like(mean)
    return MomentTrace(times=times, mean_sq=mean, ci_half_width=ci)
