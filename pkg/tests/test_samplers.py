import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_bench import noise
from langevin_bench.errors import MissingConstantError, StepsizeGuardError
from langevin_bench.potentials import double_well, gaussian
from langevin_bench.samplers import (
    ChainState,
    ProjectionParams,
    lmc_step,
    prlmc_step,
    project,
    rlmc_step,
    run_chain,
)

SQRT2 = math.sqrt(2.0)


class TestLmcStep:
    def test_gaussian_contraction(self, gaussian2):
        s = ChainState(x=np.array([1.0, 1.0]), n=0, h=0.5)
        out = lmc_step(gaussian2, s, np.zeros(2))
        np.testing.assert_allclose(out.x, [0.5, 0.5])
        assert out.n == 1 and out.t == 0.5

    def test_zero_h_identity(self, gaussian2):
        s = ChainState(x=np.array([1.0, 1.0]), n=0, h=0.0)
        out = lmc_step(gaussian2, s, np.zeros(2))
        np.testing.assert_array_equal(out.x, [1.0, 1.0])

    def test_with_noise_hand_value(self, gaussian2):
        s = ChainState(x=np.array([1.0, 1.0]), n=0, h=0.5)
        out = lmc_step(gaussian2, s, np.array([1.0, 0.0]))
        np.testing.assert_allclose(out.x, [0.5 + SQRT2, 0.5], rtol=1e-15)

    def test_divergence_flag(self, gaussian2):
        s = ChainState(x=np.array([1.0, 0.0]), n=0, h=0.5)
        out = lmc_step(gaussian2, s, np.array([1e7, 0.0]))
        assert out.diverged


class TestRlmcStep:
    def test_tau_zero_reduces_to_lmc(self, gaussian2):
        s = ChainState(x=np.array([0.3, -0.7]), n=2, h=0.25)
        dw = np.array([0.11, -0.05])
        a = rlmc_step(gaussian2, s, 0.0, np.zeros(2), dw)
        b = lmc_step(gaussian2, s, dw)
        np.testing.assert_array_equal(a.x, b.x)

    def test_hand_value_1d(self):
        spec = gaussian(1)
        s = ChainState(x=np.array([1.0]), n=0, h=0.5)
        out = rlmc_step(spec, s, 0.5, np.zeros(1), np.zeros(1))
        # midpoint 1 - 1*0.25 = 0.75; corrector 1 - 0.75*0.5 = 0.625
        np.testing.assert_allclose(out.x, [0.625], rtol=1e-15)

    def test_zero_h_identity(self, gaussian2):
        s = ChainState(x=np.array([2.0, 3.0]), n=0, h=0.0)
        out = rlmc_step(gaussian2, s, 0.7, np.zeros(2), np.zeros(2))
        np.testing.assert_array_equal(out.x, [2.0, 3.0])


class TestProject:
    def test_origin_fixed(self):
        p = ProjectionParams(theta=1.0, gamma=1.0, dim=2, h=0.5)
        np.testing.assert_array_equal(project(np.zeros(2), p), np.zeros(2))

    def test_identity_inside_ball(self):
        p = ProjectionParams(theta=1.0, gamma=1.0, dim=1, h=1.0)  # R = 1
        assert p.radius == 1.0
        np.testing.assert_array_equal(project(np.array([0.5]), p), [0.5])

    def test_scaling_outside_ball(self):
        p = ProjectionParams(theta=1.0, gamma=1.0, dim=2, h=1.0)  # R = 2^(1/4)
        r = 2.0**0.25
        out = project(np.array([3.0, 4.0]), p)
        np.testing.assert_allclose(out, np.array([3.0, 4.0]) * r / 5.0, rtol=1e-15)

    def test_h_zero_rejected(self):
        with pytest.raises(ValueError):
            ProjectionParams(theta=1.0, gamma=1.0, dim=2, h=0.0)


class TestProjectionLemma:
    """The clipping map's five inequalities on randomized draws."""

    @staticmethod
    def _draws(n, seed):
        rng = np.random.default_rng(seed)
        for _ in range(n):
            d = int(rng.integers(1, 65))
            h = float(rng.uniform(0.0, 1.0)) or 1e-3
            gamma = float(rng.choice([1.0, 2.0, 3.0]))
            theta = float(rng.choice([0.5, 1.0, 2.0]))
            scale = 10.0 ** rng.uniform(-2, 3)
            x = rng.normal(size=d) * scale
            y = rng.normal(size=d) * scale
            yield d, h, gamma, theta, x, y

    def test_suite_10k_draws(self):
        tol = 1e-12
        for d, h, gamma, theta, x, y in self._draws(10_000, seed=20240801):
            p = ProjectionParams(theta=theta, gamma=gamma, dim=d, h=h)
            r = p.radius
            tx, ty = project(x, p), project(y, p)
            # (a) image inside the ball
            assert np.linalg.norm(tx) <= r * (1 + tol)
            # (b) contraction
            assert np.linalg.norm(tx - ty) <= np.linalg.norm(x - y) * (1 + tol)
            # (c) displacement cap, both k exponents
            gap = np.linalg.norm(x - tx)
            for k in (1, 2):
                cap = (
                    2.0 * theta ** (-2 * k * (gamma + 1)) * d ** (-k) * h**k
                    * np.linalg.norm(x) ** (2 * k * (gamma + 1) + 1)
                )
                assert gap <= cap * (1 + tol) + 1e-300
            # (d) never grows the norm
            assert np.linalg.norm(tx) <= np.linalg.norm(x) * (1 + tol) + 1e-300

    def test_drift_cap_double_well(self):
        # (e) |F(T(x))| <= L2' sqrt(d) + 2 L2 sqrt(d/h) at the default theta=1
        tol = 1e-12
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            d = int(rng.integers(1, 65))
            h = float(rng.uniform(1e-4, 1.0))
            spec = double_well(d)
            k = spec.constants
            p = ProjectionParams(theta=1.0, gamma=k.gamma, dim=d, h=h)
            x = rng.normal(size=d) * 10.0 ** rng.uniform(-2, 3)
            f_norm = np.linalg.norm(spec.grad(project(x, p)))
            cap = k.poly_L2_prime * math.sqrt(d) + 2 * k.poly_L2 * math.sqrt(d / h)
            assert f_norm <= cap * (1 + tol)


class TestPrlmcStep:
    def test_equals_rlmc_inside_ball(self, double_well2):
        p = ProjectionParams(theta=1.0, gamma=2.0, dim=2, h=2**-6)
        s = ChainState(x=np.array([0.3, -0.2]), n=0, h=2**-6)
        dwt, dw = np.array([0.01, 0.0]), np.array([0.02, -0.01])
        a = prlmc_step(double_well2, s, 0.4, dwt, dw, p)
        b = rlmc_step(double_well2, s, 0.4, dwt, dw)
        np.testing.assert_array_equal(a.x, b.x)

    def test_uniform_bound_far_out(self, double_well2):
        k = double_well2.constants
        h = 2**-4
        p = ProjectionParams(theta=1.0, gamma=2.0, dim=2, h=h)
        r = p.radius
        cap = r + h * (k.poly_L2_prime * math.sqrt(2) + 2 * k.poly_L2 * r**3)
        for scale in (1e3, 1e6, 1e9):
            s = ChainState(x=np.array([scale, scale]), n=0, h=h)
            out = prlmc_step(double_well2, s, 0.5, np.zeros(2), np.zeros(2), p)
            assert np.linalg.norm(out.x) <= cap * (1 + 1e-12)

    def test_rejects_lipschitz_regime(self, gaussian2):
        p = ProjectionParams(theta=1.0, gamma=1.0, dim=2, h=0.1)
        s = ChainState(x=np.zeros(2), n=0, h=0.1)
        with pytest.raises(MissingConstantError):
            prlmc_step(gaussian2, s, 0.5, np.zeros(2), np.zeros(2), p)


class TestRunChain:
    def test_zero_steps_returns_x0(self, gaussian2):
        path = noise.make_path(1, 0, 2, 1.0, 2**-8)
        out = run_chain("lmc", gaussian2, np.array([2.0, -1.0]), 2**-5, 0, path)
        np.testing.assert_array_equal(out.final.x, [2.0, -1.0])

    def test_determinism(self, gaussian2):
        path = noise.make_path(5, 3, 2, 1.0, 2**-9)
        taus = noise.make_tau_stream(5, 3)
        a = run_chain("rlmc", gaussian2, np.zeros(2), 2**-5, 32, path, taus)
        path2 = noise.make_path(5, 3, 2, 1.0, 2**-9)
        taus2 = noise.make_tau_stream(5, 3)
        b = run_chain("rlmc", gaussian2, np.zeros(2), 2**-5, 32, path2, taus2)
        np.testing.assert_array_equal(a.final.x, b.final.x)
        np.testing.assert_array_equal(a.snapshots, b.snapshots)

    def test_guard_enforced_and_forced(self, mixture10):
        path = noise.make_path(1, 0, 10, 1.0, 2**-10)
        taus = noise.make_tau_stream(1, 0)
        with pytest.raises(StepsizeGuardError):
            run_chain("rlmc", mixture10, np.zeros(10), 2**-4, 4, path, taus)
        out = run_chain("rlmc", mixture10, np.zeros(10), 2**-4, 4, path, taus, force=True)
        assert not out.diverged

    def test_divergence_stops_iteration(self, double_well2):
        path = noise.make_path(2, 0, 2, 64.0, 0.5 / 16)
        taus = noise.make_tau_stream(2, 0)
        out = run_chain(
            "lmc", double_well2, np.full(2, 10.0), 0.5, 100, path, taus, force=True
        )
        assert out.diverged and out.diverged_at is not None
        assert out.diverged_at <= 10
        assert out.snapshot_steps[-1] == out.diverged_at

    def test_snapshot_schedule(self, gaussian2):
        path = noise.make_path(3, 0, 2, 1.0, 2**-8)
        out = run_chain("lmc", gaussian2, np.zeros(2), 2**-5, 16, path, record=4)
        np.testing.assert_array_equal(out.snapshot_steps, [0, 4, 8, 12, 16])
        assert out.snapshots.shape == (5, 2)

    def test_needs_tau_stream(self, gaussian2):
        path = noise.make_path(1, 0, 2, 1.0, 2**-8)
        with pytest.raises(ValueError):
            run_chain("rlmc", gaussian2, np.zeros(2), 2**-5, 4, path)


@given(
    x=st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    theta=st.sampled_from([0.5, 1.0, 2.0]),
    gamma=st.sampled_from([1.0, 2.0, 3.0]),
    h=st.floats(2**-10, 1.0),
)
@settings(max_examples=300, deadline=None)
def test_projection_properties_hypothesis(x, theta, gamma, h):
    x = np.asarray(x, dtype=float)
    p = ProjectionParams(theta=theta, gamma=gamma, dim=len(x), h=h)
    tx = project(x, p)
    assert np.linalg.norm(tx) <= min(p.radius, np.linalg.norm(x)) * (1 + 1e-12) + 1e-300
    # idempotent up to one rounding of the boundary scaling
    np.testing.assert_allclose(project(tx, p), tx, rtol=1e-15, atol=1e-300)
