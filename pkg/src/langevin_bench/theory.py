"""Closed-form constants, guards and mixing-time formulas.

Every function here evaluates an explicit expression in the declared
assumption constants; nothing is fitted or simulated.  The pipeline is

    m1, m2  ->  k1_k2  ->  main_bound  ->  mixing_time
    ergodicity_constants -> (cal_K, eta) -> theta_cap, lam

where `m1(p)` caps the SDE's 2p-th moment, `m2` caps the randomized
sampler's second moment, (K1, K2) scale the finite-time mean-square error,
(cal_K, eta) quantify exponential ergodicity under the log-Sobolev
constant rho, and (C1, C2, lam) assemble the uniform-in-time W2 bound

    W2(law(Y_n), pi)  <=  C1 sqrt(d) h + C2 sqrt(d) exp(-lam n h).

All operations are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import MissingConstantError, StepsizeGuardError
from .potentials import PotentialSpec

__all__ = [
    "TheoryConstants",
    "m1",
    "m2",
    "k1_k2",
    "ergodicity_constants",
    "main_bound",
    "stepsize_guard",
    "mixing_time",
    "constants_for",
    "rlmc_stationary_variance",
    "lmc_stationary_variance",
    "PRLMC_MOMENT_ENVELOPE",
]

# The projected scheme's uniform moment cap has the shape
# e^{-mu t / 2} E|x0|^2 + 2 M3 d / mu, but its prefactor M3 has no closed
# form.  This empirical envelope stands in for M3 in the stability study;
# it is far above the observed plateaus of the built-ins yet far below any
# blow-up, so the check stays falsifiable.
PRLMC_MOMENT_ENVELOPE = 12.5


def m1(p: float, mu: float, mu_prime: float, c: float) -> float:
    """Second-moment cap coefficient of the continuous dynamics.

    m1(p) = 2 (2p - 1 + mu')^p / (c p) * ((2p - 2) / ((2 mu - c) p))^(p-1)
    with the convention 0^0 = 1, so at p = 1 the second factor drops out
    exactly (never evaluated as a power of zero).
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not 0.0 < c < 2.0 * mu:
        raise ValueError(f"c must lie in (0, 2 mu) = (0, {2 * mu}), got {c}")
    lead = 2.0 * (2.0 * p - 1.0 + mu_prime) ** p / (c * p)
    if p == 1:
        return lead
    return lead * ((2.0 * p - 2.0) / ((2.0 * mu - c) * p)) ** (p - 1.0)


def m2(mu: float, mu_prime: float, L1_prime: float, h: float) -> float:
    """Uniform-in-time second-moment cap of the randomized sampler:
    (20 + 20 L1'^2 h + 2 mu') / mu."""
    if h <= 0:
        raise ValueError("h must be positive")
    cap = min(1.0, 1.0 / mu, math.inf if L1_prime == 0 else 1.0 / L1_prime)
    if h > cap:
        warnings.warn(
            f"h={h} outside the moment lemma's stepsize range; evaluating anyway",
            stacklevel=2,
        )
    return (20.0 + 20.0 * L1_prime * L1_prime * h + 2.0 * mu_prime) / mu


def k1_k2(L1: float, L1_prime: float, m1_1: float, m2_val: float) -> tuple[float, float]:
    """Finite-time mean-square error coefficients (per d and per E|x0|^2):

    K1 = 4 (14 + 15 L1^2) (L1^2 L1' + m1(1) L1^2 + m2 L1^3 + L1^2)
    K2 = 4 (10 + 11 L1^2) L1^3
    """
    if min(L1, m1_1, m2_val) <= 0 or L1_prime < 0:
        raise ValueError("constants must be positive (L1' nonnegative)")
    L1sq = L1 * L1
    k1 = 4.0 * (14.0 + 15.0 * L1sq) * (L1sq * L1_prime + m1_1 * L1sq + m2_val * L1sq * L1 + L1sq)
    k2 = 4.0 * (10.0 + 11.0 * L1sq) * L1sq * L1
    return k1, k2


def _exp(x: float) -> float:
    """exp that saturates to inf instead of raising; several constants here
    are astronomically slack off the friendliest inputs."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def ergodicity_constants(rho: float, L: float) -> tuple[float, float]:
    """Exponential W2-ergodicity pair (cal_K, eta) of the dynamics:

    cal_K = max( sqrt(2 rho L / (1 - e^{-2L})) e^{4/rho},  e^{2L + 2/rho} )
    eta   = 2 / rho
    """
    if rho <= 0 or L <= 0:
        raise ValueError("rho and L must be positive")
    branch1 = math.sqrt(2.0 * rho * L / (-math.expm1(-2.0 * L))) * _exp(4.0 / rho)
    branch2 = _exp(2.0 * L + 2.0 / rho)
    return max(branch1, branch2), 2.0 / rho


@dataclass(frozen=True)
class TheoryConstants:
    """The full constant set for one potential / initial-law configuration.

    sigma is the initial-moment ratio (E|x0|^2 <= sigma d): 0 for a
    deterministic start at the origin, 1 for a standard Gaussian start.
    lam1 is the decay rate of the projected variant's bound, whose
    prefactors have no closed form and are deliberately not evaluated.
    """

    m1_p: float
    c: float
    m2: float
    k1: float
    k2: float
    cal_k: float
    eta: float
    theta_cap: float
    lam: float
    lam1: float
    c1: float
    c2: float
    sigma: float

    def __post_init__(self):
        if self.lam > self.eta * (1 + 1e-12):
            raise ValueError("decay rate lam cannot exceed eta")

    def as_dict(self) -> dict:
        return {
            "m1_1": self.m1_p, "c": self.c, "m2": self.m2,
            "k1": self.k1, "k2": self.k2, "cal_K": self.cal_k, "eta": self.eta,
            "theta_cap": self.theta_cap, "lambda": self.lam, "lambda1": self.lam1,
            "c1": self.c1, "c2": self.c2, "sigma": self.sigma,
        }


def constants_for(
    spec: PotentialSpec,
    h: float,
    sigma: float = 0.0,
    c: Optional[float] = None,
    lsi_rho: Optional[float] = None,
) -> TheoryConstants:
    """Assemble TheoryConstants for a Lipschitz-regime potential.

    The free parameter c defaults to mu (the midpoint of its admissible
    interval (0, 2 mu)).  lsi_rho overrides the potential's declared
    log-Sobolev constant, which is required here.
    """
    k = spec.constants
    if k.regime != "lipschitz":
        raise MissingConstantError(
            "the uniform-in-time bound needs the gradient-Lipschitz regime (L1)"
        )
    rho = lsi_rho if lsi_rho is not None else k.require_lsi_rho()
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    c_val = k.mu if c is None else c
    L1 = k.lip_L1
    L1p = k.lip_L1_prime or 0.0
    m1_1 = m1(1, k.mu, k.mu_prime, c_val)
    m2_val = m2(k.mu, k.mu_prime, L1p, h)
    k1, k2 = k1_k2(L1, L1p, m1_1, m2_val)
    cal_k, eta = ergodicity_constants(rho, k.one_sided_L)
    log_k1 = math.log(cal_k) + 1.0
    theta_cap = log_k1 / eta + 1.0 / L1
    lam = eta / (log_k1 + eta / L1)
    lam1 = eta / (log_k1 + eta / (2.0 * k.one_sided_L))
    # may saturate to inf: the prefactor is exp(1 + 12 L1 Theta)
    c1 = _exp(1.0 + 12.0 * L1 * theta_cap) * math.sqrt(k1 + k2 * m2_val + k2 * sigma)
    c2 = math.sqrt(2.0) * math.e * math.sqrt(m1_1 + m2_val + 4.0 * sigma)
    return TheoryConstants(
        m1_p=m1_1, c=c_val, m2=m2_val, k1=k1, k2=k2, cal_k=cal_k, eta=eta,
        theta_cap=theta_cap, lam=lam, lam1=lam1, c1=c1, c2=c2, sigma=sigma,
    )


def main_bound(
    d: int, h: float, n: int, constants: TheoryConstants, L1: float,
    guard: Optional[float] = None, force: bool = False,
) -> tuple[float, float, float]:
    """Evaluate the uniform-in-time W2 bound C1 sqrt(d) h + C2 sqrt(d) e^{-lam n h}.

    Returns (total, stepsize_term, ergodicity_term).  A stepsize outside
    the admissible range (``guard`` if given, else 1 and 1/L1) raises
    unless ``force``, which downgrades the violation to a warning.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if h <= 0 or d < 1:
        raise ValueError("need h > 0 and d >= 1")
    cap = guard if guard is not None else min(1.0, 1.0 / L1)
    if h > cap:
        if not force:
            raise StepsizeGuardError(
                f"h={h} exceeds the admissible stepsize {cap}; pass force=True to evaluate"
            )
        warnings.warn(f"h={h} exceeds the admissible stepsize {cap}", stacklevel=2)
    sqrt_d = math.sqrt(d)
    term1 = constants.c1 * sqrt_d * h
    term2 = constants.c2 * sqrt_d * math.exp(-constants.lam * n * h)
    return term1 + term2, term1, term2


def stepsize_guard(kind: str, spec: PotentialSpec) -> float:
    """Largest admissible stepsize for the given scheme on this potential.

    Gradient-Lipschitz regime (lmc, rlmc):
        min(1, 1/mu, 1/L1, 1/L1', mu / (21 L1^2))
    Polynomial regime (prlmc):
        min(1, 1/(2L), 1/mu, 1/d^gamma)
    A zero constant contributes no cap (treated as +inf).
    """
    k = spec.constants

    def inv(x: float) -> float:
        return math.inf if x == 0 else 1.0 / x

    if kind in ("lmc", "rlmc"):
        if k.regime != "lipschitz":
            raise MissingConstantError(
                f"{kind} guard needs the gradient-Lipschitz constants (L1)"
            )
        L1 = k.lip_L1
        L1p = k.lip_L1_prime or 0.0
        return min(1.0, inv(k.mu), inv(L1), inv(L1p), k.mu / (21.0 * L1 * L1))
    if kind == "prlmc":
        if k.regime != "polynomial":
            raise MissingConstantError("prlmc guard needs the polynomial-growth constants")
        return min(1.0, 1.0 / (2.0 * k.one_sided_L), inv(k.mu), 1.0 / spec.dim ** k.gamma)
    raise ValueError(f"unknown sampler kind {kind!r}")


def mixing_time(eps: float, d: int, constants: TheoryConstants) -> tuple[int, float]:
    """Iterations and stepsize achieving W2 accuracy eps via the bound.

    Splits the bound evenly: h = eps / (2 C1 sqrt(d)) kills the stepsize
    term, then k = ceil((1/lam) (2 C1 sqrt(d)/eps) log(2 C2 sqrt(d)/eps))
    kills the ergodicity term; k grows as sqrt(d)/eps up to the log factor.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    if not (math.isfinite(constants.c1) and math.isfinite(constants.c2)):
        raise ValueError("bound constants overflow the float range; mixing time undefined")
    sqrt_d = math.sqrt(d)
    h = eps / (2.0 * constants.c1 * sqrt_d)
    log_arg = 2.0 * constants.c2 * sqrt_d / eps
    if log_arg <= 1.0:
        return 1, h
    k = math.ceil((1.0 / constants.lam) * (2.0 * constants.c1 * sqrt_d / eps) * math.log(log_arg))
    return max(int(k), 1), h


# ---------------------------------------------------------------------------
# Stationary variances of the schemes on the linear drift grad U = x
# ---------------------------------------------------------------------------


def lmc_stationary_variance(h: float) -> float:
    """Per-coordinate stationary variance of x' = (1-h) x + sqrt(2) dW:
    v = 2h / (1 - (1-h)^2) = 1 / (1 - h/2)."""
    if not 0.0 < h < 2.0:
        raise ValueError("the linear chain is stationary only for h in (0, 2)")
    return 1.0 / (1.0 - 0.5 * h)


def rlmc_stationary_variance(h: float) -> float:
    """Per-coordinate stationary variance of the randomized midpoint chain
    on the linear drift.

    One step reads x' = (1 - h + tau h^2) x + sqrt(2)(dW - h dW_tau) with
    tau ~ U(0,1), dW_tau ~ N(0, tau h) the initial slice of dW ~ N(0, h).
    Taking expectations of the squared recursion over tau and the jointly
    Gaussian pair gives the fixed point

        v = (2 - 2h + h^2) / (2 - 2h + h^2 - h^3/3),

    a 1 + h^3/6 + O(h^4) inflation of the exact unit variance.
    """
    num = 2.0 - 2.0 * h + h * h
    den = num - h * h * h / 3.0
    if h <= 0 or den <= 0 or _linear_rlmc_contracts(h) >= 1.0:
        raise ValueError(f"the randomized linear chain is not stationary at h={h}")
    return num / den


def _linear_rlmc_contracts(h: float) -> float:
    """E[(1 - h + tau h^2)^2] of the linear randomized chain."""
    a = 1.0 - h
    return a * a + a * h * h + h ** 4 / 3.0
