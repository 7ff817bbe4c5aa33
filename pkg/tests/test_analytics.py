import math

import numpy as np
import pytest

from specmarket.analytics import (
    VarianceBounds,
    dim_distribution,
    p_cant_cancel,
    var_r0,
    variance_curve,
)
from specmarket.errors import ConfigError


class TestVarR0:
    def test_reference_values(self):
        assert var_r0(1024) == pytest.approx(1.4735e-3, abs=1e-7)
        assert var_r0(8) == pytest.approx(0.18861, abs=1e-5)

    def test_quadrupling_agents_halves_the_std(self):
        assert math.sqrt(var_r0(4 * 256)) == pytest.approx(math.sqrt(var_r0(256)) / 2)

    def test_rejects_empty_market(self):
        with pytest.raises(ConfigError):
            var_r0(0)


class TestDimDistribution:
    def test_single_vector_is_point_mass(self):
        dims, probs = dim_distribution(17, 1)
        assert dims.tolist() == [1.0]
        assert probs.tolist() == [1.0]

    def test_two_vectors_in_two_dimensions(self):
        dims, probs = dim_distribution(2, 2)
        assert dims.tolist() == [1.0, 2.0]
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_sums_to_one(self):
        for increment in ("full", "half", "interpolated"):
            for dimension, n in ((4, 8), (30, 12), (128, 200), (512, 1024)):
                _, probs = dim_distribution(dimension, n, increment)
                assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_matches_real_rank_monte_carlo(self):
        dims, probs = dim_distribution(4, 8)
        predicted = float(probs[dims == 4.0][0])
        rng = np.random.default_rng(123)
        matrices = rng.integers(0, 2, size=(100_000, 8, 4)).astype(float)
        ranks = np.linalg.matrix_rank(matrices)
        observed = float((ranks == 4).mean())
        assert abs(predicted - observed) < 0.02

    def test_rejects_out_of_range(self):
        with pytest.raises(ConfigError):
            dim_distribution(0, 4)
        with pytest.raises(ConfigError):
            dim_distribution(1 << 20, 4)
        with pytest.raises(ConfigError):
            dim_distribution(8, 3, "steep")


class TestCancellation:
    def test_saturated_span_cancels_everything(self):
        assert p_cant_cancel(3, 64) == pytest.approx(0.0, abs=1e-9)
        assert p_cant_cancel(3, 64, "half") == pytest.approx(0.0, abs=1e-9)

    def test_lone_agent(self):
        for dimension in (8, 64, 512):
            assert p_cant_cancel(dimension, 1) == pytest.approx(1 - 1 / dimension, rel=1e-2)

    def test_monotone_in_speculators(self):
        for increment in ("full", "half", "interpolated"):
            values = [p_cant_cancel(64, n, increment) for n in (1, 2, 4, 8, 16, 32, 64, 128, 256)]
            assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_matches_least_squares_oracle(self):
        # cancellation by an optimal unconstrained superposition of +-1 impact
        # vectors: uncancelled energy fraction versus the span recursion
        rng = np.random.default_rng(77)
        dimension, n_spec, trials = 8, 4, 6000
        total = 0.0
        for _ in range(trials):
            others = 2.0 * rng.integers(0, 2, size=(dimension, n_spec - 1)) - 1.0
            target = 2.0 * rng.integers(0, 2, size=dimension) - 1.0
            coef = np.linalg.lstsq(others, target, rcond=None)[0]
            residual = target - others @ coef
            total += float(residual @ residual) / dimension
        observed = total / trials
        assert abs(observed - p_cant_cancel(dimension, n_spec)) < 0.05


class TestVarianceCurve:
    def test_bound_ordering(self):
        for bounds in variance_curve(512, [2.0 ** k for k in range(-5, 4)]):
            assert 0.0 <= bounds.lower <= bounds.heuristic + 1e-18
            assert bounds.heuristic <= bounds.upper + 1e-18

    def test_phase_transition_locations(self):
        curve = {b.alpha: b for b in variance_curve(64, [0.25, 0.5, 0.7, 2.0])}
        # the lower limit vanishes below alpha = 1, the upper below alpha = 1/2
        assert curve[0.5].lower < 1e-9 * var_r0(128)
        assert curve[0.25].upper < 1e-9 * var_r0(256)
        # between the transitions only the upper limit stays macroscopic
        assert curve[0.7].lower < 1e-3 * curve[0.7].upper
        assert curve[0.7].upper > 0.05 * var_r0(round(64 / 0.7))
        assert curve[2.0].lower > 0.5 * var_r0(32)

    def test_empty_market_asymptote(self):
        # far too few agents to cancel anything: all curves at var_r0 * (1 - 1/D)
        for bounds in variance_curve(512, [256.0]):
            target = var_r0(2) * (1 - 1 / 512)
            assert bounds.lower == pytest.approx(target, rel=1e-2)
            assert bounds.upper == pytest.approx(target, rel=1e-2)
            assert bounds.heuristic == pytest.approx(target, rel=1e-2)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ConfigError):
            variance_curve(64, [0.0])
