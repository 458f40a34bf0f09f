import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_bench import noise
from langevin_bench.errors import (
    GridAlignmentError,
    MemoryBudgetError,
    QuantizationGuardError,
)
from langevin_bench.noise import (
    coarse_increment,
    draw_tau,
    make_path,
    make_tau_stream,
    quantize_tau,
    sub_increment,
)


class TestMakePath:
    def test_shape_and_counting(self):
        path = make_path(seed=1, sample_index=0, dim=2, horizon=1.0, h_ref=0.25)
        assert path.n_fine == 4
        assert path.increments.shape == (4, 2)

    def test_replay_determinism(self):
        a = make_path(seed=9, sample_index=3, dim=4, horizon=2.0, h_ref=2**-8)
        b = make_path(seed=9, sample_index=3, dim=4, horizon=2.0, h_ref=2**-8)
        np.testing.assert_array_equal(a.increments, b.increments)

    def test_distinct_keys_differ(self):
        a = make_path(seed=9, sample_index=3, dim=4, horizon=1.0, h_ref=2**-8)
        b = make_path(seed=9, sample_index=4, dim=4, horizon=1.0, h_ref=2**-8)
        assert not np.allclose(a.increments, b.increments)

    def test_non_integral_grid_rejected(self):
        with pytest.raises(GridAlignmentError):
            make_path(seed=0, sample_index=0, dim=1, horizon=1.0, h_ref=0.3)

    def test_memory_budget(self):
        with pytest.raises(MemoryBudgetError):
            make_path(
                seed=0, sample_index=0, dim=8, horizon=1.0, h_ref=2**-10,
                budget_bytes=100, allow_streaming=False,
            )

    def test_streaming_fallback_matches_eager(self):
        eager = make_path(seed=5, sample_index=1, dim=3, horizon=1.0, h_ref=2**-6)
        stream = make_path(
            seed=5, sample_index=1, dim=3, horizon=1.0, h_ref=2**-6, budget_bytes=100
        )
        assert stream.is_streaming
        with pytest.raises(MemoryBudgetError):
            _ = stream.increments
        # window sums agree to roundoff (block accumulation vs global prefix)
        np.testing.assert_allclose(
            stream.window_sum(3, 40), eager.window_sum(3, 40), rtol=0, atol=1e-12
        )

    def test_first_increment_mean_clt(self):
        # mean over many sample indices of the first increment coordinate
        n = 100_000
        h_ref = 2**-6
        vals = np.empty(n)
        for i in range(n):
            gen = noise.keyed_generator(42, i, noise.PURPOSE_W, 0)
            vals[i] = gen.standard_normal(1)[0] * math.sqrt(h_ref)
        assert abs(vals.mean()) <= 4 * math.sqrt(h_ref / n)


class TestCoarseIncrement:
    def test_ratio_one_is_fine_increment_bitwise(self):
        path = make_path(seed=2, sample_index=0, dim=3, horizon=1.0, h_ref=2**-4)
        np.testing.assert_array_equal(
            coarse_increment(path, 5, 2**-4), path.increments[5]
        )

    def test_telescoping_sum(self):
        path = make_path(seed=2, sample_index=7, dim=2, horizon=2.0, h_ref=2**-8)
        h = 2**-3
        total = sum(coarse_increment(path, n, h) for n in range(int(2.0 / h)))
        w_t = path.prefix()[-1]
        np.testing.assert_allclose(total, w_t, rtol=0, atol=1e-12)

    def test_coinciding_intervals_exact_across_stepsizes(self):
        # h1 = 2^-4, h2 = 2^-6: window [0, 2^-4) is step 0 at h1 and steps 0..3 at h2
        path = make_path(seed=3, sample_index=0, dim=2, horizon=1.0, h_ref=2**-10)
        lhs = coarse_increment(path, 0, 2**-4)
        rhs = sum(coarse_increment(path, n, 2**-6) for n in range(4))
        # identical prefix differences telescope; roundoff only in the 4-term sum
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-14)
        # the same interval read twice is bitwise identical
        np.testing.assert_array_equal(lhs, coarse_increment(path, 0, 2**-4))

    def test_misaligned_h_rejected(self):
        path = make_path(seed=0, sample_index=0, dim=1, horizon=1.0, h_ref=2**-4)
        with pytest.raises(GridAlignmentError):
            coarse_increment(path, 0, 0.3)

    def test_variance_matches_h(self):
        h = 2**-3
        vals = []
        for i in range(400):
            path = make_path(seed=11, sample_index=i, dim=4, horizon=1.0, h_ref=2**-8)
            for n in range(8):
                vals.append(coarse_increment(path, n, h))
        v = np.concatenate(vals).var()
        # 12800 samples: chi-square CI well within +-5%
        assert v == pytest.approx(h, rel=0.05)


class TestSubIncrement:
    def test_quantization_is_integral(self):
        path = make_path(seed=4, sample_index=0, dim=2, horizon=1.0, h_ref=2**-8)
        tau_q, dw = sub_increment(path, 0, 2**-3, 0.37)
        assert (tau_q * 32) == int(tau_q * 32)
        assert dw.shape == (2,)

    def test_partition_identity(self):
        path = make_path(seed=4, sample_index=1, dim=3, horizon=1.0, h_ref=2**-9)
        h = 2**-4
        tau_q, dw = sub_increment(path, 3, h, 0.61)
        ratio = 32
        m = int(round(tau_q * ratio))
        rest = path.window_sum(3 * ratio + m, 4 * ratio)
        np.testing.assert_allclose(
            dw + rest, coarse_increment(path, 3, h), rtol=0, atol=1e-13
        )

    def test_guard(self):
        path = make_path(seed=4, sample_index=0, dim=1, horizon=1.0, h_ref=2**-4)
        with pytest.raises(QuantizationGuardError):
            sub_increment(path, 0, 2**-2, 0.5)
        tau_q, _ = sub_increment(path, 0, 2**-2, 0.5, force=True)
        assert 0 < tau_q < 1

    def test_conditional_variance(self):
        # per-coordinate variance of dw_tau given tau_q is tau_q * h
        h, ratio = 2**-3, 32
        tau = 0.5  # quantizes to exactly 16/32
        vals = []
        for i in range(3000):
            path = make_path(seed=12, sample_index=i, dim=2, horizon=h, h_ref=h / ratio)
            tau_q, dw = sub_increment(path, 0, h, tau)
            assert tau_q == 0.5
            vals.append(dw)
        v = np.concatenate(vals).var()
        assert v == pytest.approx(tau * h, rel=0.05)

    @given(
        tau=st.floats(min_value=1e-6, max_value=1 - 1e-6),
        log_ratio=st.integers(min_value=4, max_value=10),
    )
    @settings(max_examples=200, deadline=None)
    def test_quantization_error_bound(self, tau, log_ratio):
        ratio = 2**log_ratio
        tau_q, m = quantize_tau(tau, ratio)
        assert 1 <= m <= ratio - 1
        # rounding gives half a grid cell; clamping at the edges one full cell
        assert abs(tau_q - tau) <= 1.0 / ratio + 1e-15
        if 1.5 / ratio < tau < 1 - 1.5 / ratio:
            assert abs(tau_q - tau) <= 0.5 / ratio + 1e-15


class TestTauStream:
    def test_open_interval_and_determinism(self):
        s1 = make_tau_stream(7, 0)
        s2 = make_tau_stream(7, 0)
        vals = s1.values(100_000)
        assert vals.min() > 0.0 and vals.max() < 1.0
        np.testing.assert_array_equal(vals, s2.values(100_000))

    def test_mean_clt(self):
        vals = make_tau_stream(13, 5).values(100_000)
        assert abs(vals.mean() - 0.5) <= 4 * (1 / math.sqrt(12)) / math.sqrt(100_000)

    def test_draw_indexing(self):
        s = make_tau_stream(7, 0)
        vals = s.values(10)
        assert draw_tau(s, 1) == vals[0]
        assert draw_tau(s, 10) == vals[9]
        with pytest.raises(ValueError):
            draw_tau(s, 0)

    def test_independence_from_increments(self):
        # correlation between tau_1 and the first increment coordinate
        n = 10_000
        taus = np.empty(n)
        incs = np.empty(n)
        for i in range(n):
            taus[i] = draw_tau(make_tau_stream(21, i), 1)
            gen = noise.keyed_generator(21, i, noise.PURPOSE_W, 0)
            incs[i] = gen.standard_normal(1)[0]
        r = np.corrcoef(taus, incs)[0, 1]
        assert abs(r) <= 4 / math.sqrt(n)
