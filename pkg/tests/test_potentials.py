import math

import numpy as np
import pytest

from langevin_bench import potentials
from langevin_bench.errors import DimensionMismatchError, NonFiniteInputError
from langevin_bench.potentials import (
    AssumptionConstants,
    double_well,
    eval_grad,
    eval_value,
    gaussian,
    gaussian_mixture,
    make_potential,
    probe_assumptions,
)


class TestValues:
    def test_gaussian_value(self):
        assert eval_value(gaussian(2), [3.0, 4.0]) == 12.5

    def test_double_well_value_hand(self):
        # alpha/4 |x|^4 - beta/2 |x|^2 at x=(1,0): 1/4 - 1/2
        assert eval_value(double_well(2), [1.0, 0.0]) == pytest.approx(-0.25, abs=0)

    def test_mixture_value_at_mode(self):
        spec = gaussian_mixture(4, a_norm=2.0)
        a = np.full(4, 1.0)  # |a|^2 = 4
        expected = -math.log(1.0 + math.exp(-8.0))
        assert eval_value(spec, a) == pytest.approx(expected, rel=1e-14)

    def test_batched_value(self):
        spec = gaussian(3)
        x = np.arange(12.0).reshape(4, 3)
        np.testing.assert_allclose(eval_value(spec, x), 0.5 * (x * x).sum(axis=1))


class TestGradients:
    def test_gaussian_grad(self):
        np.testing.assert_array_equal(eval_grad(gaussian(2), [1.0, -2.0]), [1.0, -2.0])

    def test_double_well_grad_hand(self):
        # |x|^2 x - x at x=(2,0): (4*2-2, 0)
        np.testing.assert_allclose(eval_grad(double_well(2), [2.0, 0.0]), [6.0, 0.0])

    def test_mixture_grad_at_origin(self):
        spec = gaussian_mixture(5)
        np.testing.assert_allclose(eval_grad(spec, np.zeros(5)), np.zeros(5), atol=1e-15)

    def test_mixture_grad_matches_logistic_form(self):
        # independent oracle: x - a + 2 a s(-2<x,a>) with s the logistic
        spec = gaussian_mixture(3, a_norm=2.0)
        a = np.full(3, 2.0 / np.sqrt(3))
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=3) * 3
            u = x @ a
            s = 1.0 / (1.0 + math.exp(2.0 * u))
            np.testing.assert_allclose(eval_grad(spec, x), x - a + 2 * a * s, rtol=1e-12, atol=1e-12)

    def test_mixture_grad_near_modes(self):
        # far out along +/- a the gradient approaches the near mode's x -/+ a
        spec = gaussian_mixture(6, a_norm=2.0)
        a = np.full(6, 2.0 / np.sqrt(6))
        for mult in (40.0, -40.0):
            x = mult * a
            target = x - a if mult > 0 else x + a
            np.testing.assert_allclose(eval_grad(spec, x), target, atol=1e-6)

    @pytest.mark.parametrize("name", ["gaussian", "double_well", "gaussian_mixture"])
    def test_gradient_consistency_finite_differences(self, name):
        # directional finite difference of the value matches <grad, v>
        spec = make_potential(name, 6)
        rng = np.random.default_rng(7)
        eps = 1e-6
        for _ in range(100):
            x = rng.normal(size=6) * 2
            v = rng.normal(size=6)
            v /= np.linalg.norm(v)
            fd = (eval_value(spec, x + eps * v) - eval_value(spec, x - eps * v)) / (2 * eps)
            ip = float(eval_grad(spec, x) @ v)
            assert fd == pytest.approx(ip, rel=1e-5, abs=1e-7)


class TestValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            eval_value(gaussian(3), [1.0, 2.0])

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteInputError):
            eval_grad(gaussian(2), [np.nan, 0.0])

    def test_exactly_one_regime(self):
        with pytest.raises(ValueError):
            AssumptionConstants(mu=1, mu_prime=0, one_sided_L=1)
        with pytest.raises(ValueError):
            AssumptionConstants(
                mu=1, mu_prime=0, one_sided_L=1, lip_L1=1, poly_L2=1, gamma=2
            )

    def test_make_potential_unknown(self):
        with pytest.raises(ValueError):
            make_potential("banana", 2)

    def test_lsi_rho_required(self):
        with pytest.raises(Exception):
            gaussian_mixture(3).constants.require_lsi_rho()


class TestProbes:
    def test_gaussian_sharp_constants_hold(self):
        rep = probe_assumptions(gaussian(4), n_pairs=2000, radius=5.0, seed=1)
        assert rep.all_nonnegative
        # equality cases: margins sit at zero, not below
        assert rep.dissipativity_margin >= 0.0
        assert rep.growth_margin >= 0.0

    def test_gaussian_false_mu_falsified(self):
        spec = gaussian(4)
        bad = potentials.PotentialSpec(
            name="gaussian", dim=4, value=spec.value, grad=spec.grad,
            constants=AssumptionConstants(
                mu=2.0, mu_prime=0.0, one_sided_L=1.0, lip_L1=1.0, lip_L1_prime=0.0
            ),
        )
        rep = probe_assumptions(bad, n_pairs=500, radius=5.0, seed=2)
        assert rep.dissipativity_margin < 0
        assert not rep.all_nonnegative

    def test_double_well_dissipativity_margin(self):
        # mu=beta, mu'=beta^2/alpha: margin = alpha r^4 - 2 beta r^2 + mu' d >= 0 for d >= 1
        rep = probe_assumptions(double_well(3), n_pairs=4000, radius=6.0, seed=3)
        assert rep.dissipativity_margin >= 0

    @pytest.mark.parametrize(
        "spec", [gaussian(3), double_well(3), gaussian_mixture(3)], ids=lambda s: s.name
    )
    def test_builtin_constants_never_falsified(self, spec):
        rep = probe_assumptions(spec, n_pairs=10_000, radius=10.0, seed=11)
        assert rep.all_nonnegative, (
            f"{spec.name}: margins {rep.dissipativity_margin}, "
            f"{rep.one_sided_margin}, {rep.growth_margin}"
        )

    def test_probe_input_validation(self):
        with pytest.raises(ValueError):
            probe_assumptions(gaussian(2), n_pairs=0, radius=1.0, seed=0)
        with pytest.raises(ValueError):
            probe_assumptions(gaussian(2), n_pairs=10, radius=-1.0, seed=0)
