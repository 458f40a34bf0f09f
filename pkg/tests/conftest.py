import numpy as np
import pytest

from langevin_bench import potentials


@pytest.fixture
def gaussian2():
    return potentials.gaussian(2)


@pytest.fixture
def gaussian10():
    return potentials.gaussian(10)


@pytest.fixture
def double_well2():
    return potentials.double_well(2)


@pytest.fixture
def mixture10():
    return potentials.gaussian_mixture(10)


@pytest.fixture
def flat3():
    """Zero-drift potential: pure diffusion, used for exact-coupling checks."""
    return potentials.PotentialSpec(
        name="flat",
        dim=3,
        value=lambda x: np.zeros(x.shape[:-1]),
        grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        constants=potentials.AssumptionConstants(
            mu=1.0, mu_prime=1.0, one_sided_L=1.0, lip_L1=1.0, lip_L1_prime=0.0
        ),
    )
