import math

import numpy as np
import pytest

from dphmc.metrics import (
    MmdResult,
    effective_sample_size,
    mean_error,
    median_heuristic_width,
    mmd,
    permutation_null_mmd2,
    split_r_hat,
)


class TestMedianHeuristic:
    def test_degenerate_fallback_with_warning(self):
        point = np.ones((10, 2))
        with pytest.warns(RuntimeWarning, match="falling back"):
            width = median_heuristic_width(point, point.copy(), np.random.default_rng(0))
        assert width == 1.0

    def test_standard_normal_constant(self):
        # cross distances of two standard normals are |N(0, 2)|; the median
        # is sqrt(2) * Phi^{-1}(3/4) ~= 0.95387 (frozen from a 1e7-draw
        # Monte Carlo oracle: 0.95364)
        rng = np.random.default_rng(1)
        A = rng.normal(size=(10**4, 1))
        B = rng.normal(size=(10**4, 1))
        width = median_heuristic_width(A, B, np.random.default_rng(2))
        assert width == pytest.approx(0.95387, rel=0.05)

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(500, 2))
        B = rng.normal(size=(500, 2))
        w1 = median_heuristic_width(A, B, np.random.default_rng(7))
        w2 = median_heuristic_width(3.5 * A, 3.5 * B, np.random.default_rng(7))
        assert w2 == pytest.approx(3.5 * w1, rel=1e-12)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(100, 2))
        B = rng.normal(size=(100, 2))
        w1 = median_heuristic_width(A, B, np.random.default_rng(11))
        w2 = median_heuristic_width(A, B, np.random.default_rng(11))
        assert w1 == w2


class TestMmd:
    def test_identical_samples_give_zero(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(50, 3))
        assert mmd(A, A.copy(), 1.0).value == pytest.approx(0.0, abs=1e-15)

    def test_singleton_closed_form(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[1.0, 2.0]])
        w = 1.7
        expected = 2.0 * (1.0 - math.exp(-5.0 / (2.0 * w**2)))
        assert mmd(a, b, w).value == pytest.approx(expected, rel=1e-12)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(6)
        A = rng.normal(size=(40, 2))
        B = rng.normal(size=(30, 2))
        perm = rng.permutation(40)
        assert mmd(A, B, 1.0).value == pytest.approx(mmd(A[perm], B, 1.0).value, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(20, 2))
        B = rng.normal(size=(25, 2)) + 1.0
        assert mmd(A, B, 2.0).value == mmd(B, A, 2.0).value

    def test_nonnegative(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            A = rng.normal(size=(rng.integers(2, 30), 2))
            B = rng.normal(size=(rng.integers(2, 30), 2))
            result = mmd(A, B, 0.5 + rng.random())
            assert result.value >= -1e-12
            assert result.mmd >= 0.0

    def test_records_kernel_convention(self):
        result = mmd(np.zeros((2, 1)), np.ones((2, 1)), 1.3)
        assert isinstance(result, MmdResult)
        assert result.kernel_width == 1.3
        assert result.estimator_kind == "biased"


class TestMeanError:
    def test_exact_match(self):
        S = np.tile([1.0, 2.0], (5, 1))
        assert mean_error(S, np.array([1.0, 2.0])) == 0.0

    def test_symmetric_points_cancel(self):
        S = np.array([[2.0, 3.0], [-2.0, -3.0]])
        assert mean_error(S, np.zeros(2)) == 0.0

    def test_clt_bound(self):
        rng = np.random.default_rng(9)
        mu = np.array([1.0, -2.0])
        S = mu + rng.normal(size=(10**4, 2))
        assert mean_error(S, mu) <= 4 * math.sqrt(2 / 10**4)


class TestSplitRHat:
    def test_copied_chains_match_formula_oracle(self):
        rng = np.random.default_rng(10)
        chain = rng.normal(size=(400, 1))
        value = split_r_hat([chain, chain.copy(), chain.copy()])

        # independent evaluation of the split between/within construction
        half = 200
        groups = np.array([chain[:half, 0], chain[half:, 0]] * 3)
        means = groups.mean(axis=1)
        W = groups.var(axis=1, ddof=1).mean()
        B = half * means.var(ddof=1)
        expected = math.sqrt(((half - 1) / half * W + B / half) / W)
        assert value == pytest.approx(expected, rel=1e-12)
        assert value <= 1.01

    def test_constant_distinct_chains_give_infinity(self):
        a = np.zeros((10, 1))
        b = np.ones((10, 1))
        assert split_r_hat([a, b]) == math.inf

    def test_chain_order_invariance(self):
        rng = np.random.default_rng(11)
        chains = [rng.normal(size=(100, 2)) for _ in range(4)]
        assert split_r_hat(chains) == split_r_hat(chains[::-1])

    def test_long_iid_chains_converge(self):
        # 4 chains of 2000 iid draws in 2-D: R-hat < 1.05 nearly always
        ok = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            chains = [rng.normal(size=(2000, 2)) for _ in range(4)]
            ok += split_r_hat(chains) < 1.05
        assert ok >= 19

    def test_separated_chains_detected(self):
        rng = np.random.default_rng(12)
        chains = [rng.normal(size=(500, 1)) + shift for shift in [0.0, 5.0, -5.0, 2.0]]
        assert split_r_hat(chains) > 1.5


class TestNullCalibration:
    def test_same_distribution_mmd_below_null_quantile(self):
        # scaled-down version of the calibration protocol (the acceptance
        # suite runs the full m=1000 band once); two independent draws from
        # one distribution should sit inside the permutation noise floor
        trials, hits = 40, 0
        for seed in range(trials):
            rng = np.random.default_rng(1000 + seed)
            A = rng.normal(size=(300, 2))
            B = rng.normal(size=(300, 2))
            width = median_heuristic_width(A, B, rng)
            observed = mmd(A, B, width).value
            null = permutation_null_mmd2(A, B, width, 100, rng)
            hits += observed <= np.quantile(null, 0.99)
        assert hits >= 0.95 * trials - 2

    def test_shifted_distribution_exceeds_null(self):
        rng = np.random.default_rng(13)
        A = rng.normal(size=(300, 2))
        B = rng.normal(size=(300, 2)) + 1.5
        width = median_heuristic_width(A, B, rng)
        observed = mmd(A, B, width).value
        null = permutation_null_mmd2(A, B, width, 100, rng)
        assert observed > np.quantile(null, 0.99)


class TestEffectiveSampleSize:
    def test_iid_chain_near_full_size(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=5000)
        assert effective_sample_size(x) > 2500

    def test_sticky_chain_much_smaller(self):
        rng = np.random.default_rng(15)
        x = np.zeros(5000)
        for i in range(1, 5000):
            x[i] = 0.99 * x[i - 1] + math.sqrt(1 - 0.99**2) * rng.normal()
        assert effective_sample_size(x) < 500

    def test_constant_chain(self):
        assert effective_sample_size(np.ones(100)) == 100.0
