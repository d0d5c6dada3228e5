"""
Tests for the Time2Vec network: embedding, gradients, training and forecasting.
"""

import numpy as np
import pytest

from feecast.config import T2VConfig
from feecast.errors import HorizonNonPositive, ShapeMismatch, TooFewRows
from feecast.models import get_forecaster
from feecast.models.t2v import (
    T2VForecaster,
    carry_index,
    embed,
    forecast_t2v,
    forward,
    gradient_check,
    init_params,
    train_t2v,
)

TINY = T2VConfig(embedding_dim=4, hidden=[5, 3], season=12, horizon=6)


class TestEmbedding:
    def test_linear_then_periodic(self, rng):
        params = init_params(0, TINY, span=100.0, rng=rng)
        tau = np.array([0.0, 0.25, 0.5])
        e = embed(tau, params)
        assert e.shape == (3, 4)
        np.testing.assert_allclose(e[:, 0], params.omega[0] * tau + params.phase[0])
        np.testing.assert_allclose(e[:, 1:], np.sin(tau[:, None] * params.omega[1:] + params.phase[1:]))

    def test_zero_frequencies_give_zero_periodic_terms(self, rng):
        """With omega and phase at zero the periodic part is sin(0) for every tau."""
        params = init_params(0, TINY, span=100.0, rng=rng)
        params.omega = np.zeros(params.k)
        params.phase = np.zeros(params.k)
        e = embed(rng.uniform(-5, 5, size=50), params)
        np.testing.assert_array_equal(e, np.zeros((50, params.k)))

    def test_initial_periods_span_ten_days_to_a_tenth(self, rng):
        """Periodic frequencies start log-spaced between 10 seasons and a tenth of one."""
        cfg = T2VConfig(embedding_dim=64)
        params = init_params(0, cfg, span=1.0, rng=rng)
        periods = 2 * np.pi / params.omega[1:]
        assert periods.max() == pytest.approx(1440.0)
        assert periods.min() == pytest.approx(14.4)
        assert np.any(np.isclose(periods, 144.0))

    def test_layer_shapes(self, rng):
        params = init_params(3, TINY, span=1.0, rng=rng)
        assert [w.shape for w in params.weights] == [(4 + 3 + 1, 5), (5, 3), (3, 1)]
        assert all(np.all(b == 0) for b in params.biases)


class TestGradients:
    def test_analytic_matches_finite_difference(self, rng):
        """Backprop agrees with central differences to 1e-4 relative error."""
        params = init_params(2, TINY, span=1.0, rng=rng)
        tau = rng.uniform(0, 1, size=6)
        X = rng.normal(size=(6, 2))
        h_frac = rng.uniform(0, 1, size=6)
        y = rng.normal(size=6)
        assert gradient_check(tau, X, h_frac, y, params) < 1e-4

    def test_feature_count_checked(self, rng):
        params = init_params(2, TINY, span=1.0, rng=rng)
        with pytest.raises(ShapeMismatch):
            forward(np.zeros(3), np.zeros((3, 5)), 0.5, params)


class TestCarryIndex:
    def test_seasonal(self):
        """A forecast issued after row 99 for row 100 + j reads row 100 - s + j."""
        t = np.array([100, 101, 105])
        h = np.array([1, 2, 6])
        np.testing.assert_array_equal(carry_index(t, h, "seasonal", 12), [88, 89, 93])

    def test_freeze(self):
        np.testing.assert_array_equal(carry_index(np.array([100, 103]), np.array([1, 4]), "freeze", 12), [99, 99])


class TestTraining:
    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            train_t2v(np.arange(12.0), None, np.ones(12), TINY)

    def test_deterministic_for_seed(self, rng):
        t = np.arange(200.0)
        y = np.sin(2 * np.pi * t / 12) + rng.normal(scale=0.1, size=200)
        cfg = TINY.model_copy(update={"max_epochs": 3})
        a = train_t2v(t, None, y, cfg)
        b = train_t2v(t, None, y, cfg)
        np.testing.assert_array_equal(forecast_t2v(a, 199, 6), forecast_t2v(b, 199, 6))
        assert len(a.train_loss) == 3

    def test_constant_target_is_fit_exactly(self, rng):
        t = np.arange(120.0)
        X = rng.normal(size=(120, 2))
        model = train_t2v(t, X, np.full(120, 7.5), TINY.model_copy(update={"max_epochs": 2}))
        h = rng.integers(1, TINY.horizon + 1, size=120)
        pred = model.predict(t, X, h)
        assert np.sqrt(np.mean((pred - 7.5) ** 2)) <= 1e-2
        np.testing.assert_allclose(forecast_t2v(model, 119, 6), 7.5)

    def test_horizon_must_be_positive(self, rng):
        t = np.arange(100.0)
        model = train_t2v(t, None, rng.normal(size=100), TINY.model_copy(update={"max_epochs": 1}))
        with pytest.raises(HorizonNonPositive):
            forecast_t2v(model, 99, 0)

    @pytest.mark.slow
    def test_daily_sinusoid(self):
        """A noiseless daily cycle is forecast one day ahead within 0.1 RMSE."""
        t = np.arange(1440.0)
        y = np.sin(2 * np.pi * t / 144)
        model = train_t2v(t, None, y, T2VConfig())
        t_future = np.arange(1440.0, 1584.0)
        err = forecast_t2v(model, 1439, 144) - np.sin(2 * np.pi * t_future / 144)
        assert np.sqrt(np.mean(err**2)) < 0.1


class TestForecaster:
    def test_fit_forecast_round_trip(self, synth_small, fast_t2v):
        model = T2VForecaster(fast_t2v).fit(synth_small.slice(0, 300))
        fc = model.forecast(12)
        assert fc.start == 300
        assert np.isfinite(fc.values).all()
        restored = T2VForecaster.from_dict(model.to_dict())
        np.testing.assert_allclose(restored.forecast(12).values, fc.values, rtol=1e-12)

    def test_configured_standardize_columns(self, synth_small, fast_t2v):
        """Only the configured columns are rescaled; the rest enter the network unchanged."""
        model = T2VForecaster(fast_t2v, standardize_columns=["tx_count", "avg_fee_rate"])
        model.fit(synth_small.slice(0, 300))
        assert sorted(model.scaling.values) == ["avg_fee_rate", "tx_count"]
        restored = T2VForecaster.from_dict(model.to_dict())
        assert restored.standardize_columns == ["tx_count", "avg_fee_rate"]

    def test_factory_reads_prep_section(self, fast_config):
        cfg = fast_config.model_copy(deep=True)
        cfg.prep.standardize_columns = ["difficulty"]
        forecaster = get_forecaster("t2v", cfg)
        assert forecaster.standardize_columns == ["difficulty"]
