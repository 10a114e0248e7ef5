"""Unit tests for the scikit-learn style estimator front end."""

import numpy as np
import pytest
from sklearn.base import clone

from minimax_agg import MinimaxEnsembleAggregator


def _synthetic(seed=0, n_lab=300, n_test=60, p=4,
               acc=(0.85, 0.75, 0.65, 0.6)):
    rng = np.random.default_rng(seed)
    z_lab = np.sign(rng.uniform(-1, 1, n_lab))
    z_test = np.sign(rng.uniform(-1, 1, n_test))

    def preds(z):
        return np.array([np.where(rng.uniform(0, 1, z.size) < a, z, -z)
                         for a in acc]).T

    X = np.vstack([preds(z_lab), preds(z_test)])
    y = np.concatenate([z_lab, np.zeros(n_test)])
    return X, y, z_test


class TestFit:
    def test_learns_and_attributes(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(loss="log", stat_slack=0.05).fit(X, y)
        assert est.sigma_.shape == (4,)
        assert est.b_.shape == (4,)
        assert np.isfinite(est.game_value_)
        np.testing.assert_array_equal(est.classes_, [-1.0, 1.0])

    def test_beats_chance_on_test_rows(self):
        X, y, z_test = _synthetic()
        est = MinimaxEnsembleAggregator(loss="zero_one",
                                        stat_slack=0.05).fit(X, y)
        acc = np.mean(est.predict(X[-60:]) == z_test)
        assert acc > 0.6

    def test_nan_marks_unlabeled(self):
        X, y, _ = _synthetic()
        y2 = np.where(y == 0, np.nan, y)
        a = MinimaxEnsembleAggregator(b=[0.3, 0.2, 0.2, 0.1]).fit(X, y)
        b = MinimaxEnsembleAggregator(b=[0.3, 0.2, 0.2, 0.1]).fit(X, y2)
        np.testing.assert_allclose(a.sigma_, b.sigma_)

    def test_explicit_b_overrides_estimation(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(b=[0.5, 0.4, 0.3, 0.2]).fit(X, y)
        np.testing.assert_array_equal(est.b_, [0.5, 0.4, 0.3, 0.2])

    def test_requires_labels_or_b(self):
        X, y, _ = _synthetic()
        with pytest.raises(ValueError, match="labeled rows"):
            MinimaxEnsembleAggregator().fit(X[-60:], None)

    def test_rejects_bad_labels(self):
        X, y, _ = _synthetic()
        y = y.copy()
        y[0] = 0.5
        with pytest.raises(ValueError, match="labels"):
            MinimaxEnsembleAggregator().fit(X, y)

    def test_general_loss_variant(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(loss="square",
                                        variant="general_loss",
                                        stat_slack=0.05).fit(X, y)
        assert est.loss_bounds_.shape == (4,)
        # worst-case loss never exceeds the best single constituent
        assert est.game_value_ <= est.loss_bounds_.min() + 1e-6


class TestPredictionSurface:
    def test_probabilities_consistent_with_aggregate(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(loss="log", stat_slack=0.05).fit(X, y)
        T = X[-60:]
        g = est.aggregate(T)
        proba = est.predict_proba(T)
        np.testing.assert_allclose(proba[:, 1] - proba[:, 0], g, atol=1e-12)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(est.predict(T),
                                      np.where(g >= 0, 1.0, -1.0))

    def test_margins_are_linear_in_sigma(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(b=[0.3, 0.2, 0.2, 0.1]).fit(X, y)
        T = X[-10:]
        np.testing.assert_allclose(est.decision_function(T),
                                   T @ est.sigma_, atol=1e-12)

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError, match="fit"):
            MinimaxEnsembleAggregator().predict(np.zeros((2, 3)))

    def test_column_count_checked(self):
        X, y, _ = _synthetic()
        est = MinimaxEnsembleAggregator(b=[0.3, 0.2, 0.2, 0.1]).fit(X, y)
        with pytest.raises(ValueError, match="columns"):
            est.predict(np.zeros((2, 3)))


class TestSklearnProtocol:
    def test_get_params_round_trip(self):
        est = MinimaxEnsembleAggregator(loss="cw:0.25", epsilon=0.1)
        params = est.get_params()
        assert params["loss"] == "cw:0.25"
        cloned = clone(est)
        assert cloned.get_params() == params
