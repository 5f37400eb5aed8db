"""Linear threshold classification, polarity, feature search, Krippendorff."""

import math

import numpy as np
import pytest

from fidgetkit.analysis import (
    NEAR_ZERO,
    NEGATIVE,
    POSITIVE,
    INCONSISTENT,
    average_fidget,
    feature_search,
    krippendorff_alpha,
    linear_classify,
    polarity,
    polarity_report,
)
from fidgetkit.errors import DataError
from fidgetkit.fidgets import FIDGET_ROWS, FidgetMatrix


class TestAverageFidget:
    def matrix(self, rows):
        return FidgetMatrix(rows=np.asarray(rows, dtype=np.uint8), row_names=FIDGET_ROWS)

    def test_all_zero(self):
        m = self.matrix(np.zeros((8, 50)))
        assert all(v == 0.0 for v in average_fidget(m).values())

    def test_half_active(self):
        rows = np.zeros((8, 40))
        rows[0, :20] = 1
        means = average_fidget(self.matrix(rows))
        assert means["CHF"] == 0.5

    def test_random_row_matches_counting_oracle(self):
        rng = np.random.default_rng(0)
        rows = rng.integers(0, 2, (8, 333)).astype(np.uint8)
        means = average_fidget(self.matrix(rows))
        for i, name in enumerate(FIDGET_ROWS):
            assert means[name] == pytest.approx(int(rows[i].sum()) / 333)

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataError):
            average_fidget(self.matrix(np.zeros((8, 0))))


def separable_participants(n=12, n_features=4, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([i % 2 for i in range(n)])
    x = rng.standard_normal((n, n_features))
    x[:, 0] = y * 2.0 - 1.0 + rng.normal(0, 0.05, n)
    return x, y


class TestLinearClassify:
    def test_separable_f1_one(self):
        x, y = separable_participants()
        res = linear_classify(x, y, folds=3, seed=0)
        assert res.f1_mean == 1.0
        assert not res.used_ridge

    def test_constant_feature_uses_ridge_with_zero_weight(self):
        x, y = separable_participants()
        x = np.hstack([x, np.full((len(y), 1), 5.0)])
        res = linear_classify(x, y, folds=3, seed=0)
        assert res.used_ridge
        tokens = polarity(res.coefficients)
        assert tokens[-1] == NEAR_ZERO

    def test_affine_equivariance(self):
        x, y = separable_participants()
        res1 = linear_classify(x, y, folds=3, seed=0)
        scaled = x.copy()
        scaled[:, 0] *= 10.0
        res2 = linear_classify(scaled, y, folds=3, seed=0)
        assert res2.f1_per_fold == res1.f1_per_fold
        for c1, c2 in zip(res1.coefficients, res2.coefficients):
            assert np.allclose(c2[0], c1[0] / 10.0)
            assert np.allclose(c2[1:], c1[1:])

    def test_needs_enough_participants(self):
        x, y = separable_participants(n=2)
        with pytest.raises(DataError):
            linear_classify(x, y, folds=3)


class TestPolarity:
    def test_tokens(self):
        coefs = [np.array([0.3, 0.3, 1e-9]), np.array([0.2, -0.2, -1e-9]),
                 np.array([0.4, 0.4, 0.0])]
        assert polarity(coefs, tol=1e-6) == [POSITIVE, INCONSISTENT, NEAR_ZERO]

    def test_negative(self):
        coefs = [np.array([-0.3]), np.array([-0.2])]
        assert polarity(coefs) == [NEGATIVE]

    def test_exactly_one_token_per_feature(self):
        rng = np.random.default_rng(0)
        coefs = [rng.standard_normal(10) for _ in range(3)]
        tokens = polarity(coefs)
        assert len(tokens) == 10
        assert all(t in (POSITIVE, NEGATIVE, NEAR_ZERO, INCONSISTENT) for t in tokens)

    def test_report_formatting(self):
        report = polarity_report(["He-GL", "Hn-GS"], [np.array([0.5, -0.5]), np.array([0.4, -0.4])])
        assert report.formatted() == ["He-GL+", "Hn-GS¬"]

    def test_needs_two_folds(self):
        with pytest.raises(DataError):
            polarity([np.array([1.0])])


class TestFeatureSearch:
    def test_planted_signal_found(self):
        x, y = separable_participants(n=12, n_features=3)
        res = feature_search(x, y, ["f0", "f1", "f2"], folds=3, seed=0)
        assert res.exhaustive
        assert res.n_evaluated == 7
        assert res.best_subset == ("f0",)
        assert res.f1_mean == 1.0

    def test_enumeration_arithmetic(self):
        # the exhaustive limit covers 2^20 - 1 subsets at 20 candidates
        assert (1 << 20) - 1 == 1048575

    def test_monotone_from_search_log(self):
        x, y = separable_participants(n=12, n_features=4)
        res = feature_search(x, y, ["f0", "f1", "f2", "f3"], folds=3, seed=0)
        logged = dict(res.log)
        best = set(res.best_subset)
        for name in ("f1", "f2", "f3"):
            superset = tuple(sorted(best | {name}, key=["f0", "f1", "f2", "f3"].index))
            if superset in logged:
                assert logged[superset] <= res.f1_mean

    def test_beam_search_beyond_limit(self):
        rng = np.random.default_rng(0)
        n_feat = 22
        y = np.array([i % 2 for i in range(12)])
        x = rng.standard_normal((12, n_feat))
        x[:, 7] = y * 2 - 1
        names = [f"f{i}" for i in range(n_feat)]
        res = feature_search(x, y, names, budget=300, folds=3, seed=0)
        assert not res.exhaustive
        assert res.n_evaluated <= 300
        assert "f7" in res.best_subset

    def test_empty_candidates_rejected(self):
        with pytest.raises(DataError):
            feature_search(np.zeros((5, 0)), np.zeros(5, dtype=int), [])


class TestKrippendorff:
    def test_perfect_agreement_exactly_one(self):
        a = ["x", "y", "x", "z"] * 5
        assert krippendorff_alpha(a, list(a)) == 1.0

    def test_independent_random_near_zero(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 4, 10_000).tolist()
        b = rng.integers(0, 4, 10_000).tolist()
        assert abs(krippendorff_alpha(a, b)) < 0.05

    def test_hand_computed_case(self):
        # items (a,a), (a,b), (b,b), (b,b): coincidences o_aa=2, o_ab=o_ba=1,
        # o_bb=4; n=8, marginals (3, 5); D_o = 2/8; D_e = 30/56; alpha = 8/15
        a = ["a", "a", "b", "b"]
        b = ["a", "b", "b", "b"]
        assert krippendorff_alpha(a, b) == pytest.approx(8.0 / 15.0, abs=1e-12)

    def test_degenerate_single_category(self):
        assert math.isnan(krippendorff_alpha(["a"] * 10, ["a"] * 10))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            krippendorff_alpha([1, 2], [1])

    def test_category_restriction(self):
        with pytest.raises(DataError, match="categories"):
            krippendorff_alpha(["a", "c"], ["a", "a"], categories=["a", "b"])

    def test_range(self):
        # systematic disagreement pushes alpha negative but >= -1
        a = ["x", "y"] * 50
        b = ["y", "x"] * 50
        val = krippendorff_alpha(a, b)
        assert -1.0 <= val < 0.0
