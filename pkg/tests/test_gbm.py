"""
Tests for the histogram gradient-boosted trees.
"""

import numpy as np
import pytest

from feecast.config import FeatureSpec, GbmConfig
from feecast.errors import ShapeMismatch, TooFewRows
from feecast.models.gbm import BinMapper, GbmForecaster, GbmModel, fit_gbm, grow_tree


def r_squared(y, y_hat):
    return 1.0 - np.sum((y - y_hat) ** 2) / np.sum((y - y.mean()) ** 2)


class TestBinning:
    def test_bins_are_right_closed(self):
        X = np.arange(10.0)[:, None]
        bins = BinMapper.fit(X, 64)
        B = bins.transform(X)
        assert len(np.unique(B)) == 10
        assert np.all(np.diff(B[:, 0]) > 0)

    def test_constant_column_single_bin(self):
        bins = BinMapper.fit(np.ones((20, 1)), 16)
        assert bins.max_bins == 1
        assert np.all(bins.transform(np.ones((3, 1))) == 0)


class TestTree:
    def test_single_split_on_step(self):
        """A depth-one tree splits where the step is."""
        B = np.repeat(np.arange(10), 10)[:, None]
        r = np.where(B[:, 0] >= 5, 1.0, -1.0)
        tree = grow_tree(B, r, 10, max_depth=1, min_leaf=5)
        assert tree.n_splits == 1
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 4
        np.testing.assert_array_equal(tree.predict_binned(B), r)

    def test_min_leaf_blocks_split(self):
        B = np.arange(10)[:, None]
        tree = grow_tree(B, np.arange(10.0), 10, max_depth=3, min_leaf=6)
        assert tree.n_splits == 0


class TestFit:
    def test_constant_target_needs_no_trees(self, rng):
        X = rng.normal(size=(100, 3))
        model = fit_gbm(X, np.full(100, 4.2), GbmConfig(n_trees=50))
        assert model.trees_used == 0
        np.testing.assert_allclose(model.predict(X), 4.2)

    def test_step_function(self, rng):
        """Depth-one stumps reach R^2 > 0.999 on a step within 200 trees."""
        X = rng.integers(0, 10, size=(500, 1)).astype(float)
        y = (X[:, 0] >= 5).astype(float)
        cfg = GbmConfig(n_trees=200, max_depth=1, learning_rate=0.1, validation_fraction=0.0)
        model = fit_gbm(X, y, cfg)
        assert r_squared(y, model.predict(X)) > 0.999

    def test_training_loss_never_increases(self, rng):
        X = rng.normal(size=(300, 4))
        y = np.sin(X[:, 0]) + X[:, 1] ** 2 + rng.normal(scale=0.1, size=300)
        model = fit_gbm(X, y, GbmConfig(n_trees=80, max_depth=3, learning_rate=0.1, validation_fraction=0.0))
        loss = np.asarray(model.train_loss)
        assert np.all(np.diff(loss) <= 1e-12)

    def test_refits_are_identical(self, rng):
        """No sampling anywhere in the fit, so the same data gives the same ensemble."""
        X = rng.normal(size=(300, 4))
        y = X[:, 0] - 2.0 * X[:, 2] + rng.normal(scale=0.2, size=300)
        cfg = GbmConfig(n_trees=40, max_depth=3, learning_rate=0.1, min_samples_leaf=10)
        a, b = fit_gbm(X, y, cfg), fit_gbm(X, y, cfg)
        assert a.trees_used == b.trees_used
        np.testing.assert_array_equal(a.predict(X), b.predict(X))

    def test_early_stopping_truncates(self, rng):
        """Pure noise stops early and keeps only the best round."""
        X = rng.normal(size=(400, 2))
        y = rng.normal(size=400)
        cfg = GbmConfig(n_trees=500, max_depth=4, learning_rate=0.3, patience=5, min_samples_leaf=5)
        model = fit_gbm(X, y, cfg)
        assert model.trees_used < 500
        best = int(np.argmin(model.val_loss)) + 1 if model.val_loss else 0
        assert model.trees_used in (0, best)

    def test_unused_feature_has_zero_importance(self, rng):
        X = np.column_stack([rng.normal(size=300), np.zeros(300)])
        y = 2.0 * X[:, 0]
        model = fit_gbm(X, y, GbmConfig(n_trees=20, max_depth=2, learning_rate=0.2))
        imp = model.feature_importance()
        assert imp[0] > 0
        assert imp[1] == 0

    @pytest.mark.slow
    def test_friedman(self, rng):
        """Default settings explain most variance of the Friedman #1 benchmark."""
        X = rng.uniform(size=(2000, 10))
        y = (
            10 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3]
            + 5 * X[:, 4]
            + rng.normal(size=2000)
        )
        model = fit_gbm(X[:1600], y[:1600], GbmConfig())
        assert r_squared(y[1600:], model.predict(X[1600:])) > 0.85

    def test_errors(self, rng):
        with pytest.raises(TooFewRows):
            fit_gbm(rng.normal(size=(10, 2)), rng.normal(size=10), GbmConfig())
        model = fit_gbm(rng.normal(size=(100, 2)), rng.normal(size=100), GbmConfig(n_trees=5))
        with pytest.raises(ShapeMismatch):
            model.predict(np.zeros((3, 4)))

    def test_serialization(self, rng):
        X = rng.normal(size=(200, 3))
        y = X[:, 0] - X[:, 2]
        model = fit_gbm(X, y, GbmConfig(n_trees=30, max_depth=3, learning_rate=0.2))
        restored = GbmModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(restored.predict(X), model.predict(X))


class TestForecaster:
    def test_forecast_from_engineered_features(self, synth_small, fast_gbm):
        model = GbmForecaster(fast_gbm, FeatureSpec()).fit(synth_small.slice(0, 300))
        assert len(model.columns) == 27
        fc = model.forecast(24)
        assert fc.start == 300
        assert np.isfinite(fc.values).all()
        restored = GbmForecaster.from_dict(model.to_dict())
        np.testing.assert_array_equal(restored.forecast(24).values, fc.values)
