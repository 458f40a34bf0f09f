"""Target potentials for Langevin sampling.

A target is a smooth function U on R^d sampled via pi ~ exp(-U).  Each
potential ships the structural constants its drift -grad U satisfies:

* dissipativity:     <x, grad U(x)> >= mu |x|^2 - mu' d
* one-sided bound:   <x-y, grad U(x) - grad U(y)> >= -L |x-y|^2
* either a global gradient-Lipschitz constant L1 (with |grad U(0)| = L1' sqrt(d)),
  or a polynomial-growth pair (L2, gamma) with
  |grad U(x) - grad U(y)| <= L2 (1 + |x|^gamma + |y|^gamma) |x-y|
  and |grad U(x)| <= L2' sqrt(d) + 2 L2 |x|^(gamma+1).

Exactly one of the Lipschitz / polynomial regimes is declared; the choice
selects which sampler guards and error formulas apply downstream.

Three built-ins cover the regimes of interest: an isotropic Gaussian, a
double-well with superlinear drift, and a symmetric two-mode Gaussian
mixture.  `probe_assumptions` falsification-tests declared constants by
random sampling; it never proves them, but a negative margin disproves one.

Value/gradient callables are vectorized: they accept a single point of
shape (d,) or a batch of shape (..., d), acting on the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatchError, MissingConstantError, NonFiniteInputError

__all__ = [
    "AssumptionConstants",
    "PotentialSpec",
    "ProbeReport",
    "eval_value",
    "eval_grad",
    "probe_assumptions",
    "gaussian",
    "double_well",
    "gaussian_mixture",
    "make_potential",
    "BUILTIN_NAMES",
]


@dataclass(frozen=True)
class AssumptionConstants:
    """Declared structural constants of a potential's drift.

    ``lsi_rho`` is pure metadata: it is consumed by the ergodicity formulas
    but never verified numerically (no tractable finite-sample certificate).
    """

    mu: float
    mu_prime: float
    one_sided_L: float
    lip_L1: Optional[float] = None
    lip_L1_prime: Optional[float] = None
    poly_L2: Optional[float] = None
    poly_L2_prime: Optional[float] = None
    gamma: float = 0.0
    lsi_rho: Optional[float] = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.mu_prime < 0:
            raise ValueError(f"mu_prime must be nonnegative, got {self.mu_prime}")
        if self.one_sided_L <= 0:
            raise ValueError(f"one_sided_L must be positive, got {self.one_sided_L}")
        has_lip = self.lip_L1 is not None
        has_poly = self.poly_L2 is not None and self.gamma > 0
        if has_lip == has_poly:
            raise ValueError(
                "exactly one of lip_L1 or (poly_L2, gamma>0) must be declared"
            )
        if has_lip and self.lip_L1 <= 0:
            raise ValueError("lip_L1 must be positive")
        if has_poly and self.poly_L2 <= 0:
            raise ValueError("poly_L2 must be positive")
        if self.lsi_rho is not None and self.lsi_rho <= 0:
            raise ValueError("lsi_rho must be positive when given")

    @property
    def regime(self) -> str:
        return "lipschitz" if self.lip_L1 is not None else "polynomial"

    def require_lsi_rho(self) -> float:
        if self.lsi_rho is None:
            raise MissingConstantError(
                "this potential declares no log-Sobolev constant; pass lsi_rho explicitly"
            )
        return self.lsi_rho


@dataclass(frozen=True)
class PotentialSpec:
    """A target potential: value, gradient and declared constants.

    Immutable after construction; every operation on it is pure, so specs
    are safe to share across threads.  ``kernel_id``/``kernel_params``
    identify built-ins to the compiled stepping core; custom potentials
    leave them at the defaults and run on the NumPy engine.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    constants: AssumptionConstants
    kernel_id: int = -1
    kernel_params: tuple = field(default=())

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")


def _check_point(spec: PotentialSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise DimensionMismatchError(
            f"{spec.name}: expected vectors of length {spec.dim}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError(f"{spec.name}: input contains non-finite entries")
    return x


def eval_value(spec: PotentialSpec, x) -> float | np.ndarray:
    """Evaluate U(x); for batched input the leading axes are preserved."""
    x = _check_point(spec, x)
    return spec.value(x)


def eval_grad(spec: PotentialSpec, x) -> np.ndarray:
    """Evaluate grad U(x); shape matches the input."""
    x = _check_point(spec, x)
    return spec.grad(x)


# ---------------------------------------------------------------------------
# Built-in potentials
# ---------------------------------------------------------------------------

KERNEL_GAUSSIAN = 0
KERNEL_DOUBLE_WELL = 1
KERNEL_MIXTURE = 2


def gaussian(dim: int) -> PotentialSpec:
    """Isotropic Gaussian target, U(x) = |x|^2 / 2.

    grad U = x, so every declared constant is sharp: mu = L = L1 = 1,
    mu' = L1' = 0.  The standard Gaussian satisfies the log-Sobolev
    inequality with constant 2.
    """

    def value(x):
        return 0.5 * np.sum(x * x, axis=-1)

    def grad(x):
        return np.array(x, dtype=float, copy=True)

    constants = AssumptionConstants(
        mu=1.0, mu_prime=0.0, one_sided_L=1.0, lip_L1=1.0, lip_L1_prime=0.0,
        lsi_rho=2.0,
    )
    return PotentialSpec(
        name="gaussian", dim=dim, value=value, grad=grad, constants=constants,
        kernel_id=KERNEL_GAUSSIAN, kernel_params=(),
    )


def double_well(dim: int, alpha: float = 1.0, beta: float = 1.0) -> PotentialSpec:
    """Double-well target, U(x) = alpha/4 |x|^4 - beta/2 |x|^2.

    The drift grows cubically, so only the polynomial regime applies
    (gamma = 2).  Constant derivations:

    * mu = beta, mu' = beta^2/alpha:  <x, grad U> = alpha r^4 - beta r^2
      and alpha r^4 - 2 beta r^2 is minimized at r^2 = beta/alpha with
      value -beta^2/alpha, so the deficit is covered by mu' d for any d >= 1.
    * one_sided_L = beta: the quartic part of U is convex, leaving the
      -beta/2 |x|^2 term's slope.
    * L2 = max(beta, 1.5 alpha): | |x|^2 x - |y|^2 y | <=
      (|x|^2 + |x||y| + |y|^2) |x-y| <= 1.5 (|x|^2 + |y|^2) |x-y|.
    * L2' sqrt(d) = |grad U(0)| + gamma L2 = 2 L2 (the growth-bound offset).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("double_well needs alpha > 0 and beta > 0")

    def value(x):
        r2 = np.sum(x * x, axis=-1)
        return 0.25 * alpha * r2 * r2 - 0.5 * beta * r2

    def grad(x):
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return (alpha * r2 - beta) * x

    L2 = max(beta, 1.5 * alpha)
    constants = AssumptionConstants(
        mu=beta,
        mu_prime=beta * beta / alpha,
        one_sided_L=beta,
        poly_L2=L2,
        poly_L2_prime=2.0 * L2 / np.sqrt(dim),
        gamma=2.0,
    )
    return PotentialSpec(
        name="double_well", dim=dim, value=value, grad=grad, constants=constants,
        kernel_id=KERNEL_DOUBLE_WELL, kernel_params=(alpha, beta),
    )


def gaussian_mixture(dim: int, a_norm: float = 2.0) -> PotentialSpec:
    """Symmetric two-mode Gaussian mixture 0.5 N(a, I) + 0.5 N(-a, I).

    U(x) = 0.5 |x - a|^2 - log(1 + exp(-2 <x, a>)) with a the all-equal
    vector of norm ``a_norm``; the gradient simplifies to
    x - a tanh(<x, a>), which is the numerically stable form used here.
    Declared constants: mu = 1/2, mu' d = 2 |a|^2, L1 = 1 + 4 |a|^2.
    Not log-concave, but strongly convex outside a ball; no explicit
    log-Sobolev constant is known, so ``lsi_rho`` stays unset and must be
    supplied by the caller before the ergodicity formulas can be used.
    """
    if a_norm <= 0:
        raise ValueError("gaussian_mixture needs a_norm > 0")
    a = np.full(dim, a_norm / np.sqrt(dim))
    a_sq = a_norm * a_norm

    def value(x):
        diff = x - a
        u = x @ a
        return 0.5 * np.sum(diff * diff, axis=-1) - np.logaddexp(0.0, -2.0 * u)

    def grad(x):
        u = x @ a
        return x - np.tanh(u)[..., None] * a

    constants = AssumptionConstants(
        mu=0.5,
        mu_prime=2.0 * a_sq / dim,
        one_sided_L=1.0 + 4.0 * a_sq,
        lip_L1=1.0 + 4.0 * a_sq,
        lip_L1_prime=0.0,
        lsi_rho=None,
    )
    return PotentialSpec(
        name="gaussian_mixture", dim=dim, value=value, grad=grad,
        constants=constants,
        kernel_id=KERNEL_MIXTURE, kernel_params=(a_norm,),
    )


BUILTIN_NAMES = ("gaussian", "double_well", "gaussian_mixture")


def make_potential(name: str, dim: int, **params) -> PotentialSpec:
    """Build a built-in potential by name (CLI/config entry point)."""
    if name == "gaussian":
        if params:
            raise ValueError(f"gaussian takes no parameters, got {params}")
        return gaussian(dim)
    if name == "double_well":
        return double_well(dim, **params)
    if name == "gaussian_mixture":
        return gaussian_mixture(dim, **params)
    raise ValueError(f"unknown potential {name!r}; choose from {BUILTIN_NAMES}")


# ---------------------------------------------------------------------------
# Assumption probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Worst-case margins over the sampled pairs; negative means falsified."""

    n_pairs: int
    radius: float
    dissipativity_margin: float
    one_sided_margin: float
    growth_margin: float
    growth_kind: str
    n_negative: int

    @property
    def all_nonnegative(self) -> bool:
        return self.n_negative == 0


def _uniform_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    z = rng.standard_normal((n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return z * r[:, None]


def probe_assumptions(
    spec: PotentialSpec, n_pairs: int, radius: float, seed: int
) -> ProbeReport:
    """Search for counterexamples to the declared constants.

    Samples ``n_pairs`` pairs (x, y) uniformly in the ball of the given
    radius (uniform rather than Gaussian, so large-|x| behavior is hit) and
    reports the worst margin of each declared inequality.  Falsification is
    reported in the margins, never raised.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = spec.constants
    rng = np.random.default_rng(seed)
    x = _uniform_ball(rng, n_pairs, spec.dim, radius)
    y = _uniform_ball(rng, n_pairs, spec.dim, radius)
    gx = spec.grad(x)
    gy = spec.grad(y)

    # quadratic forms share one reduction so sharp-equality margins are
    # exactly zero instead of wobbling at roundoff
    pts = np.concatenate([x, y])
    gpts = np.concatenate([gx, gy])
    diss = np.einsum("ij,ij->i", pts, gpts) - (
        c.mu * np.einsum("ij,ij->i", pts, pts) - c.mu_prime * spec.dim
    )

    dxy = x - y
    dg = gx - gy
    dist_sq = np.einsum("ij,ij->i", dxy, dxy)
    one_sided = np.einsum("ij,ij->i", dxy, dg) + c.one_sided_L * dist_sq

    dist = np.sqrt(dist_sq)
    dg_norm = np.sqrt(np.einsum("ij,ij->i", dg, dg))
    if c.regime == "lipschitz":
        growth = c.lip_L1 * dist - dg_norm
        growth_kind = "lipschitz"
    else:
        rx = np.linalg.norm(x, axis=1) ** c.gamma
        ry = np.linalg.norm(y, axis=1) ** c.gamma
        growth = c.poly_L2 * (1.0 + rx + ry) * dist - dg_norm
        growth_kind = "polynomial"

    n_negative = int((diss < 0).sum() + (one_sided < 0).sum() + (growth < 0).sum())
    return ProbeReport(
        n_pairs=n_pairs,
        radius=radius,
        dissipativity_margin=float(diss.min()),
        one_sided_margin=float(one_sided.min()),
        growth_margin=float(growth.min()),
        growth_kind=growth_kind,
        n_negative=n_negative,
    )
