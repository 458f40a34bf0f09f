"""Langevin Monte Carlo samplers and a coupled-path benchmark harness.

Three discretizations of dX = -grad U(X) dt + sqrt(2) dW:

* ``lmc``    the plain Euler chain,
* ``rlmc``   the randomized-midpoint chain (a uniformly random
             intermediate gradient per step),
* ``prlmc``  the projected randomized chain for superlinearly growing
             drifts.

Alongside the kernels: reproducible keyed Brownian paths, fine-grid
reference solutions sharing those paths, strong/weak error estimation
with convergence-order fits, closed-form constants of the underlying
error theory, and a CLI (``langevin-bench``) driving five studies.
"""

__version__ = "0.1.0"

from . import engines, metrics, noise, oracle, potentials, samplers, theory  # noqa: F401
from .potentials import PotentialSpec, double_well, gaussian, gaussian_mixture  # noqa: F401
