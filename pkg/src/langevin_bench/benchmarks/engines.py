"""Timing comparison of the compiled core against the NumPy fallback.

Run as ``python -m langevin_bench.benchmarks.engines``.  The workload is
the package's actual hot loop: fine-grid reference stepping plus a coarse
randomized chain on shared paths.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .. import engines, oracle
from ..potentials import double_well, gaussian_mixture


def _time(fn, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=64)
    parser.add_argument("--steps", type=int, default=4096, help="fine steps per path")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    names = engines.available_engines()
    if "cython" not in names:
        print("compiled core not built; benchmarking the numpy engine alone")

    h_ref = 2.0**-12
    cases = [
        ("rlmc/mixture d=10", gaussian_mixture(10), "rlmc"),
        ("prlmc/double_well d=4", double_well(4), "prlmc"),
    ]
    horizon = args.steps * h_ref * 16

    print(f"{'case':<26} {'engine':<8} {'seconds':>9}   paths={args.samples}")
    for label, spec, kind in cases:
        per_engine = {}
        for name in names:
            def work(name=name, spec=spec, kind=kind):
                oracle.coupled_error(
                    kind, spec, h=16 * h_ref, h_ref=h_ref, horizon=horizon,
                    samples=args.samples, seed=7, engine_name=name,
                )
            per_engine[name] = _time(work, args.repeats)
            print(f"{label:<26} {name:<8} {per_engine[name]:>9.3f}")
        if len(per_engine) == 2:
            speedup = per_engine["numpy"] / per_engine["cython"]
            print(f"{label:<26} {'':8} {speedup:>8.2f}x cython speedup")
    diff_check = []
    for label, spec, kind in cases:
        finals = {}
        for name in names:
            est = oracle.coupled_error(
                kind, spec, h=16 * h_ref, h_ref=h_ref, horizon=horizon,
                samples=8, seed=11, engine_name=name,
            )
            finals[name] = est.mse
        diff_check.append((label, finals))
    for label, finals in diff_check:
        vals = list(finals.values())
        agree = all(np.isclose(v, vals[0], rtol=1e-8, atol=1e-14) for v in vals)
        print(f"{label:<26} engines agree: {agree} ({finals})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
