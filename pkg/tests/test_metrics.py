import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import mannwhitneyu

from missnet.errors import MetricError
from missnet.metrics import EvalReport, auc, rank_sum_test, smse
from oracles import auc_pairs


class TestAuc:
    def test_perfect_and_reversed(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_tied(self):
        assert auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = rng.integers(0, 5, 40).astype(float)
            y = rng.integers(0, 2, 40)
            y[:2] = [0, 1]
            assert auc(s, y) == auc_pairs(s, y)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=30), st.integers(0, 2**31))
    @settings(max_examples=50)
    def test_invariant_to_monotone_transform(self, scores, seed):
        y = np.random.default_rng(seed).integers(0, 2, len(scores))
        if y.min() == y.max():
            y[0], y[1] = 0, 1
        s = np.array(scores)
        assert auc(s, y) == auc(2.0 * s, y) == auc_pairs(s, y)

    def test_one_class(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.2], [1, 1])

    def test_non_binary_labels(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.2, 0.3], [0, 1, 2])


class TestSmse:
    def test_mean_predictor_scores_one(self):
        t = np.array([1.0, 2.0, 3.0, 6.0])
        assert smse(np.full(4, t.mean()), t) == pytest.approx(1.0)

    def test_perfect(self):
        assert smse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_target(self):
        with pytest.raises(MetricError):
            smse([1.0, 2.0], [3.0, 3.0])


class TestRankSum:
    def test_matches_scipy_asymptotic(self):
        rng = np.random.default_rng(1)
        for shift in (0.0, 0.3, 1.0):
            a, b = rng.normal(size=20), rng.normal(shift, size=25)
            ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                               use_continuity=True).pvalue
            assert rank_sum_test(a, b) == pytest.approx(ref, rel=1e-10)

    def test_with_ties(self):
        a = [1, 1, 2, 2, 3, 3]
        b = [2, 3, 3, 4, 4, 5]
        ref = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic").pvalue
        assert rank_sum_test(a, b) == pytest.approx(ref, rel=1e-10)

    def test_identical_samples(self):
        assert rank_sum_test([1.0] * 6, [1.0] * 6) == 1.0

    def test_too_small(self):
        with pytest.raises(MetricError):
            rank_sum_test([1, 2], [3, 4, 5, 6, 7])


class TestEvalReport:
    def test_range_checks(self):
        with pytest.raises(MetricError):
            EvalReport("auc", 1.5, 10)
        with pytest.raises(MetricError):
            EvalReport("smse", -0.1, 10)


class TestSpecExamples:
    def test_auc_tie_pair(self):
        assert auc([0.5, 0.5], [1, 0]) == 0.5

    @given(st.lists(st.integers(0, 6), min_size=4, max_size=40), st.integers(0, 2**31))
    @settings(max_examples=50)
    def test_auc_label_complement(self, scores, seed):
        y = np.random.default_rng(seed).integers(0, 2, len(scores))
        y[:2] = [0, 1]
        assert auc(scores, y) + auc(scores, 1 - y) == 1.0

    def test_smse_arithmetic(self):
        assert smse([0.0, 0.0], [-1.0, 1.0]) == 1.0

    @given(st.floats(-50, 50), st.floats(0.1, 10), st.integers(0, 1000))
    @settings(max_examples=50)
    def test_smse_shift_and_scale(self, c, s, seed):
        rng = np.random.default_rng(seed)
        p, t = rng.normal(size=10), rng.normal(size=10)
        assert smse(p + c, t + c) == pytest.approx(smse(p, t), rel=1e-9)
        assert smse(s * p, s * t) == pytest.approx(smse(p, t), rel=1e-9)

    def test_rank_sum_separated(self):
        a, b = np.arange(1, 31), np.arange(101, 131)
        p = rank_sum_test(a, b)
        assert p < 1e-6
        assert rank_sum_test(b, a) == p

    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=15),
           st.lists(st.floats(-5, 5), min_size=5, max_size=15))
    @settings(max_examples=50)
    def test_rank_sum_range_and_symmetry(self, a, b):
        p = rank_sum_test(a, b)
        assert 0 < p <= 1 and p == rank_sum_test(b, a)
