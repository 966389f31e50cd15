"""Cyclic encodings, train-only scaling and encoding, correlations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from evtrade import features as F
from oracles import pearson_two_pass


class TestCyclic:
    @pytest.mark.parametrize("hour,expected", [(0, (0, 1)), (6, (1, 0)), (12, (0, -1))])
    def test_examples(self, hour, expected):
        np.testing.assert_allclose(F.cyclic_encode(hour, 24), expected, atol=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(0.5, 400))
    def test_unit_circle(self, value, period):
        s, c = F.cyclic_encode(value, period)
        assert abs(s * s + c * c - 1) <= 1e-12

    def test_bad_period(self):
        with pytest.raises(ValueError):
            F.cyclic_encode(1, 0)


class TestScaler:
    def test_midpoint(self):
        assert F.transform(F.fit_scaler([2, 4, 6]), [4])[0] == 0.5

    def test_constant_column(self):
        assert np.all(F.transform(F.fit_scaler([3, 3, 3]), [1, 3, 9]) == 0.5)

    def test_clipped(self):
        assert F.transform(F.fit_scaler([2, 4, 6]), [8, -1]).tolist() == [1.0, 0.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            F.fit_scaler(np.zeros((0, 2)))

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, (12, 3), elements=st.floats(-1e6, 1e6)), arrays(float, (5, 3), elements=st.floats(-1e7, 1e7)))
    def test_unit_interval(self, train, test):
        sc = F.fit_scaler(train)
        assert np.all((sc.transform(train) >= 0) & (sc.transform(train) <= 1))
        assert np.all((sc.transform(test) >= 0) & (sc.transform(test) <= 1))


class TestLabelEncoder:
    def test_lexicographic(self):
        codes, vocab = F.label_encode(["P", "C", "P"])
        assert vocab == {"C": 1, "P": 2} and codes.tolist() == [2, 1, 2]

    def test_unseen_is_zero(self):
        _, vocab = F.label_encode(["C", "P"])
        assert F.LabelEncoder(vocab).transform(["X", "C"]).tolist() == [0, 1]

    def test_deterministic(self):
        vals = ["b", "a", "c", "a"]
        assert F.label_encode(vals)[1] == F.label_encode(list(reversed(vals)))[1]


class TestPearson:
    def test_self_and_negation(self):
        x = np.array([1.0, 4.0, 2.0, 8.0])
        corr, _ = F.pearson_corr(np.column_stack([x, -x]))
        assert corr[0, 0] == 1.0 and corr[0, 1] == pytest.approx(-1.0, abs=1e-15)

    def test_against_two_pass_oracle(self):
        corr, _ = F.pearson_corr(np.array([[1, 2], [2, 4], [3, 6.1]]))
        assert corr[0, 1] == pytest.approx(pearson_two_pass([1, 2, 3], [2, 4, 6.1]), abs=1e-12)

    def test_degenerate_column(self):
        corr, deg = F.pearson_corr(np.array([[1, 5.0], [2, 5.0], [3, 5.0]]))
        assert deg.tolist() == [False, True] and corr[0, 1] == 0.0 and corr[1, 1] == 1.0

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, (10, 4), elements=st.floats(-100, 100)))
    def test_symmetric_and_bounded(self, m):
        corr, _ = F.pearson_corr(m)
        np.testing.assert_array_equal(corr, corr.T)
        assert np.all(np.abs(corr) <= 1.0) and np.all(np.diag(corr) == 1.0)

    def test_report(self, small_events):
        cols = F.raw_columns(small_events)
        enc = F.FeatureEncoder.fit(cols, np.ones(len(cols["distance_km"]), bool))
        rep = F.pairwise_correlation_report(enc.transform(cols))
        assert rep["features"] == list(F.FEATURE_NAMES) and 0 < rep["max_abs_offdiag"] <= 1


@pytest.fixture(scope="module")
def encoded(small_events):
    cols = F.raw_columns(small_events)
    n = len(cols["distance_km"])
    train = np.arange(n) < int(0.7 * n)
    enc = F.FeatureEncoder.fit(cols, train)
    return cols, train, enc, enc.transform(cols)


class TestFeatureMatrix:
    def test_arity_and_order(self, encoded, small_events):
        _, _, _, X = encoded
        rows = sum(e.candidate_count for e in small_events)
        assert X.shape == (rows, len(F.FEATURE_NAMES)) and np.all(np.isfinite(X))
        assert len(set(F.FEATURE_NAMES)) == len(F.FEATURE_NAMES)

    def test_identifiers_not_features(self):
        for ident in ("event_id", "ev_id", "journey_id", "station_id", "candidate_station_id"):
            assert ident not in F.FEATURE_NAMES

    def test_scaled_on_train_in_unit_interval(self, encoded):
        _, train, _, X = encoded
        idx = F.feature_indices(F.SCALED_FEATURES)
        block = X[np.ix_(train, idx)]
        assert np.all((block >= 0) & (block <= 1))
        for col in block.T:
            assert (col.min() == 0.0 and col.max() == 1.0) or np.all(col == 0.5)

    def test_cyclic_pairs(self, encoded):
        _, _, _, X = encoded
        for base in ("time_of_day", "day_of_week", "month"):
            s, c = X[:, F.FEATURE_NAMES.index(base + "_sin")], X[:, F.FEATURE_NAMES.index(base + "_cos")]
            assert np.all(np.abs(s**2 + c**2 - 1) <= 1e-12)

    def test_leakage_canary(self, encoded):
        cols, train, enc, X = encoded
        refit = F.FeatureEncoder.fit(cols, np.ones_like(train)).transform(cols)
        assert not np.array_equal(refit[~train], X[~train])

    def test_fit_requires_rows(self, encoded):
        cols, train, _, _ = encoded
        with pytest.raises(ValueError):
            F.FeatureEncoder.fit(cols, np.zeros_like(train))
