"""Experiment orchestration: the study subcommands and CSV emission.

Five studies::

    converge    coupled strong/weak endpoint error over a stepsize ladder,
                with the fitted convergence order
    moments     per-time second moments of an ensemble against the
                uniform-in-time cap
    stability   plain vs projected chains on shared paths from far-out
                starts (divergence fractions, median trajectories)
    onestep     strong/weak error of a single step over a stepsize ladder
    constants   closed-form constants, stepsize guards and mixing times

Configuration comes from flags, optionally over a ``key = value`` file
(flags win), with ``LANGEVIN_BENCH_SEED`` as the seed fallback.  Every CSV
starts with one comment line carrying the artifact version, the active
engine and the full resolved configuration; a rerun with the same
configuration and seed writes byte-identical output.

Exit codes: 0 success, 1 a study's acceptance threshold failed, 2 bad
usage or configuration, 3 numerical divergence in a reference solution.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__, engines, metrics, oracle, theory
from .errors import ConfigError, DivergedReferenceError, MissingConstantError
from .potentials import PotentialSpec, make_potential
from .samplers import DEFAULT_BLOWUP

STUDIES = ("converge", "moments", "stability", "onestep", "constants")

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _parse_number(tok: str) -> float:
    """Accept '0.0625', '1/16' and '2^-4' spellings for stepsizes."""
    tok = tok.strip()
    if "^" in tok:
        base, exp = tok.split("^", 1)
        return float(base) ** float(exp)
    if "/" in tok:
        num, den = tok.split("/", 1)
        return float(num) / float(den)
    return float(tok)


def _parse_number_list(text: str) -> tuple[float, ...]:
    return tuple(_parse_number(t) for t in text.split(",") if t.strip())


def _parse_potential(text: str) -> tuple[str, dict]:
    """'double_well{alpha=1,beta=1}' -> ('double_well', {...})."""
    text = text.strip()
    if "{" not in text:
        return text, {}
    if not text.endswith("}"):
        raise ConfigError(f"malformed potential spec {text!r}")
    name, body = text[:-1].split("{", 1)
    params = {}
    for item in body.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"potential parameter {item!r} must be key=value")
        k, v = item.split("=", 1)
        params[k.strip()] = _parse_number(v)
    return name, params


@dataclass
class ExperimentConfig:
    study: str
    potential: str = "gaussian"
    sampler: str = "rlmc"
    d: int = 10
    horizon: float = 5.0
    h: Optional[float] = None
    h_list: tuple = ()
    h_ref: float = 2.0**-12
    samples: int = 2000
    seed: int = 0
    x0: str = "zero"
    theta: float = 1.0
    rho: Optional[float] = None
    eps: tuple = (0.1,)
    steps: Optional[int] = None
    record_every: Optional[int] = None
    blowup: float = DEFAULT_BLOWUP
    out: str = "-"
    force: bool = False
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    engine: Optional[str] = None

    def validate(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2 (CI-reporting studies)")
        if self.d < 1 or self.horizon <= 0 or self.h_ref <= 0:
            raise ConfigError("need d >= 1, T > 0, href > 0")
        if self.study in ("converge", "onestep") and not self.h_list:
            raise ConfigError(f"{self.study} needs --h-list")
        if self.study in ("moments", "stability") and self.h is None:
            raise ConfigError(f"{self.study} needs --h")
        if self.h_list:
            if any(b >= a for a, b in zip(self.h_list, self.h_list[1:])):
                raise ConfigError("h-list must be strictly decreasing")
            if self.study == "converge":
                for h in self.h_list:
                    ratio = h / self.h_ref
                    r = int(round(ratio))
                    if r < 1 or abs(ratio - r) > 1e-9 * ratio or (r & (r - 1)):
                        raise ConfigError(
                            f"h={h} is not a dyadic multiple of href={self.h_ref}"
                        )
        if self.x0 not in ("zero", "gauss") and not self.x0.startswith("const:"):
            raise ConfigError(f"x0 must be zero|gauss|const:<v>, got {self.x0!r}")

    def spec(self) -> PotentialSpec:
        name, params = _parse_potential(self.potential)
        try:
            return make_potential(name, self.d, **params)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def x0_second_moment(self) -> float:
        """E|x0|^2 of the configured initial law."""
        if self.x0 == "zero":
            return 0.0
        if self.x0 == "gauss":
            return float(self.d)
        return float(self.d) * float(self.x0.split(":", 1)[1]) ** 2

    def sigma(self) -> float:
        """Initial-moment ratio sigma with E|x0|^2 <= sigma d."""
        return self.x0_second_moment() / self.d

    def comment_line(self) -> str:
        items = [
            f"study={self.study}", f"potential={self.potential}",
            f"sampler={self.sampler}", f"d={self.d}", f"T={self.horizon!r}",
            f"h={None if self.h is None else repr(self.h)}",
            f"h_list={','.join(repr(h) for h in self.h_list)}",
            f"href={self.h_ref!r}", f"samples={self.samples}", f"seed={self.seed}",
            f"x0={self.x0}", f"theta={self.theta!r}", f"rho={self.rho}",
            f"steps={self.steps}", f"record_every={self.record_every}",
            f"blowup={self.blowup!r}", f"force={self.force}",
        ]
        engine = engines.engine_for(self.spec(), self.engine).NAME
        return f"# langevin-bench={__version__} engine={engine} " + " ".join(items)


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    file_vals: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                for raw in fh:
                    line = raw.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(f"config line {raw!r} is not key = value")
                    k, v = line.split("=", 1)
                    file_vals[k.strip().replace("-", "_")] = v.strip()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc

    def pick(name: str, conv, default):
        val = getattr(args, name, None)
        if val is None and name in file_vals:
            val = file_vals[name]
        if val is None:
            return default
        if isinstance(val, str) and conv is not str:
            return conv(val)
        return val

    seed = pick("seed", int, None)
    if seed is None:
        seed = int(os.environ.get("LANGEVIN_BENCH_SEED", "0"))

    cfg = ExperimentConfig(
        study=args.study,
        potential=pick("potential", str, "gaussian"),
        sampler=pick("sampler", str, "rlmc"),
        d=pick("d", int, 10),
        horizon=pick("T", _parse_number, 5.0),
        h=pick("h", _parse_number, None),
        h_list=pick("h_list", _parse_number_list, ()),
        h_ref=pick("href", _parse_number, 2.0**-12),
        samples=pick("samples", int, 2000),
        seed=seed,
        x0=pick("x0", str, "zero"),
        theta=pick("theta", _parse_number, 1.0),
        rho=pick("rho", _parse_number, None),
        eps=pick("eps", _parse_number_list, (0.1,)),
        steps=pick("steps", int, None),
        record_every=pick("record_every", int, None),
        blowup=pick("blowup_threshold", _parse_number, DEFAULT_BLOWUP),
        out=pick("out", str, "-"),
        force=bool(pick("force", lambda v: v.lower() in ("1", "true", "yes"), False)),
        jobs=pick("jobs", int, os.cpu_count() or 1),
        engine=pick("engine", str, None),
    )
    cfg.validate()
    return cfg


class _CsvSink:
    """CSV writer honoring the comment-line and flush-on-row contract."""

    def __init__(self, cfg: ExperimentConfig, header: Sequence[str]):
        self._own = cfg.out != "-"
        self._fh = open(cfg.out, "w", newline="") if self._own else sys.stdout
        self._fh.write(cfg.comment_line() + "\n")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(header)
        self._fh.flush()

    def row(self, values):
        self._writer.writerow([_fmt(v) for v in values])
        self._fh.flush()

    def close(self):
        if self._own:
            self._fh.close()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def run_converge(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    sink = _CsvSink(cfg, ["kind", "h", "href", "T", "d", "M", "mse", "ci",
                          "weak_bias", "weak_ci", "diverged"])
    fit_points = []
    try:
        for h in cfg.h_list:
            est = oracle.coupled_error(
                cfg.sampler, spec, h, cfg.h_ref, cfg.horizon, cfg.samples, cfg.seed,
                theta=cfg.theta, blowup=cfg.blowup, jobs=cfg.jobs,
                engine_name=cfg.engine,
            )
            sink.row([est.kind, est.h, est.h_ref, est.horizon, est.dim, est.samples,
                      est.mse, est.ci_half_width, est.weak_bias, est.weak_ci,
                      est.diverged_coarse])
            if est.mse > 0:
                fit_points.append((h, est.rms))
    finally:
        sink.close()
    if len(fit_points) >= 3:
        fit = metrics.fit_order(fit_points)
        print("slope,intercept,r2")
        print(f"{_fmt(fit.slope)},{_fmt(fit.intercept)},{_fmt(fit.r2)}")
    else:
        print(f"# order fit skipped: {len(fit_points)} usable points (need 3)")
    return EXIT_OK


def run_moments(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    k = spec.constants
    n_steps = cfg.steps if cfg.steps is not None else int(round(cfg.horizon / cfg.h))
    ens = oracle.sample_chains(
        cfg.sampler, spec, cfg.samples, cfg.h, n_steps, cfg.seed,
        x0_policy=cfg.x0, theta=cfg.theta, record_every=cfg.record_every,
        blowup=cfg.blowup, jobs=cfg.jobs, engine_name=cfg.engine,
    )
    trace = metrics.second_moment_trace(ens.snapshots, ens.times)
    e0 = cfg.x0_second_moment()
    if cfg.sampler == "prlmc":
        cap = 2.0 * theory.PRLMC_MOMENT_ENVELOPE * cfg.d / k.mu
        bound = np.exp(-0.5 * k.mu * trace.times) * e0 + cap
    else:
        m2 = theory.m2(k.mu, k.mu_prime, k.lip_L1_prime or 0.0, cfg.h)
        bound = np.exp(-k.mu * trace.times) * e0 + m2 * cfg.d
    sink = _CsvSink(cfg, ["t", "mean_sq", "ci", "bound"])
    violated = False
    try:
        for (t, m, ci), b in zip(trace.rows(), bound):
            violated |= m > b + ci
            sink.row([t, m, ci, b])
    finally:
        sink.close()
    if violated:
        print("# moment bound violated beyond CI slack")
        return EXIT_THRESHOLD
    return EXIT_OK


def run_stability(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    n_steps = cfg.steps if cfg.steps is not None else int(round(cfg.horizon / cfg.h))
    runs = {}
    for kind in ("lmc", "prlmc"):
        runs[kind] = oracle.sample_chains(
            kind, spec, cfg.samples, cfg.h, n_steps, cfg.seed,
            x0_policy=cfg.x0, theta=cfg.theta, record_every=cfg.record_every,
            blowup=cfg.blowup, jobs=cfg.jobs, engine_name=cfg.engine,
        )
    sink = _CsvSink(cfg, ["sampler", "t", "median_norm", "diverged_frac"])
    try:
        for kind, ens in runs.items():
            norms = np.linalg.norm(ens.snapshots, axis=2)
            for i, (step, t) in enumerate(zip(ens.record_steps, ens.times)):
                dead_by_now = ens.diverged & (ens.steps_done <= step)
                sink.row([kind, t, float(np.median(norms[i])),
                          float(dead_by_now.mean())])
    finally:
        sink.close()
    for kind, ens in runs.items():
        print(f"{kind}_diverged_fraction={_fmt(float(ens.diverged.mean()))}")
    return EXIT_OK


def run_onestep(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    x = np.ones(cfg.d)
    sink = _CsvSink(cfg, ["kind", "h", "strong_rms", "strong_ci", "weak_bias", "weak_ci"])
    strong, weak = [], []
    try:
        for h in cfg.h_list:
            est = oracle.one_step_error(
                cfg.sampler, spec, x, h, cfg.samples, cfg.seed,
                theta=cfg.theta, engine_name=cfg.engine,
            )
            sink.row([est.kind, est.h, est.strong_rms, est.strong_rms_ci,
                      est.weak_bias, est.weak_ci])
            if est.strong_rms > 0:
                strong.append((h, est.strong_rms))
            if est.weak_bias > 0:
                weak.append((h, est.weak_bias))
    finally:
        sink.close()
    for label, pts in (("strong", strong), ("weak", weak)):
        if len(pts) >= 3:
            fit = metrics.fit_order(pts)
            print(f"{label}: slope,intercept,r2")
            print(f"{_fmt(fit.slope)},{_fmt(fit.intercept)},{_fmt(fit.r2)}")
        else:
            print(f"# {label} fit skipped: {len(pts)} usable points")
    return EXIT_OK


def run_constants(cfg: ExperimentConfig) -> int:
    spec = cfg.spec()
    h = cfg.h if cfg.h is not None else 2.0**-6
    tc = theory.constants_for(spec, h=h, sigma=cfg.sigma(), lsi_rho=cfg.rho)
    rows = list(tc.as_dict().items())
    rows.append(("guard_lmc", theory.stepsize_guard("lmc", spec)))
    rows.append(("guard_rlmc", theory.stepsize_guard("rlmc", spec)))
    for eps in cfg.eps:
        k_iters, h_eps = theory.mixing_time(eps, cfg.d, tc)
        rows.append((f"mixing_iters[eps={_fmt(eps)}]", k_iters))
        rows.append((f"mixing_h[eps={_fmt(eps)}]", h_eps))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {_fmt(value)}")
    sink = _CsvSink(cfg, ["name", "value"])
    try:
        for name, value in rows:
            sink.row([name, value])
    finally:
        sink.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langevin-bench",
        description="Langevin sampler benchmark harness",
    )
    sub = parser.add_subparsers(dest="study", required=True, metavar="|".join(STUDIES))
    for study in STUDIES:
        p = sub.add_parser(study)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--potential", help="gaussian | double_well{alpha=..,beta=..} | gaussian_mixture{a_norm=..}")
        p.add_argument("--sampler", choices=("lmc", "rlmc", "prlmc"))
        p.add_argument("--d", type=int, help="dimension")
        p.add_argument("--T", help="time horizon")
        p.add_argument("--h", help="stepsize (moments/stability/constants)")
        p.add_argument("--h-list", dest="h_list", help="comma list, e.g. 2^-4,2^-5,2^-6")
        p.add_argument("--href", help="fine reference stepsize (power of two)")
        p.add_argument("--samples", type=int, metavar="M")
        p.add_argument("--seed", type=int)
        p.add_argument("--x0", help="zero | gauss | const:<v>")
        p.add_argument("--theta", help="projection radius multiplier")
        p.add_argument("--rho", help="log-Sobolev constant override")
        p.add_argument("--eps", help="comma list of accuracies (constants study)")
        p.add_argument("--steps", type=int, help="step count override (default T/h)")
        p.add_argument("--record-every", dest="record_every", type=int)
        p.add_argument("--blowup-threshold", dest="blowup_threshold")
        p.add_argument("--out", help="CSV path, '-' for stdout")
        p.add_argument("--force", action="store_const", const=True)
        p.add_argument("--jobs", type=int)
        p.add_argument("--engine", choices=("numpy", "cython"))
    return parser


_RUNNERS = {
    "converge": run_converge,
    "moments": run_moments,
    "stability": run_stability,
    "onestep": run_onestep,
    "constants": run_constants,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _resolve_config(args)
        return _RUNNERS[cfg.study](cfg)
    except (ConfigError, MissingConstantError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedReferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def main():  # console entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
