"""
Tests for the backtest runner: fold evaluation, leakage guards and report files.
"""

import json

import numpy as np
import pytest
from unittest.mock import patch

from feecast.errors import InsufficientRows, LeakageError
from feecast.evaluation import BacktestRunner, evaluate_fold, run_cv, run_test
from feecast.evaluation.folds import CvFold
from feecast.models.base import ForecastSeries, Forecaster


class OracleForecaster(Forecaster):
    """Returns the realized actuals; ``offset`` shifts where it claims to start."""

    name = "oracle"

    def __init__(self, offset: int = 0):
        self.offset = offset
        self.start = 0

    @property
    def uses_realized_lag(self) -> bool:
        return True

    def fit(self, train):
        self.start = train.row_offset + len(train) + self.offset
        return self

    def forecast(self, h, realized=None):
        return ForecastSeries(self.name, self.start, np.asarray(realized[:h], dtype=float))

    def to_dict(self):
        return self.envelope(start=self.start)


class TestEvaluateFold:
    def test_naive_matches_benchmark(self, synth_small, fast_config):
        """The naive model is the Theil's U benchmark, so U is exactly 1."""
        result = evaluate_fold("naive", fast_config, synth_small, CvFold(0, 200, 224))
        assert result.metrics.theils_u == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(result.actual, synth_small.target[200:224])
        assert result.predicted[0] == synth_small.target[199]

    def test_oracle_scores_zero(self, synth_small, fast_config):
        with patch("feecast.evaluation.backtest.get_forecaster", return_value=OracleForecaster()):
            result = evaluate_fold("oracle", fast_config, synth_small, CvFold(0, 200, 224))
        assert result.metrics.mae == 0.0
        assert result.metrics.theils_u == 0.0

    def test_misaligned_forecast_is_leakage(self, synth_small, fast_config):
        """A forecast that starts anywhere but the first test row is rejected."""
        with patch("feecast.evaluation.backtest.get_forecaster", return_value=OracleForecaster(offset=-1)):
            with pytest.raises(LeakageError):
                evaluate_fold("oracle", fast_config, synth_small, CvFold(0, 200, 224))

    def test_constant_actuals_give_undefined_u(self, synth_small, fast_config):
        frame = synth_small.frame.copy()
        frame.loc[199:, "block_median_fee_rate"] = 4.0
        d = synth_small.with_frame(frame)
        result = evaluate_fold("naive", fast_config, d, CvFold(0, 200, 224))
        assert np.isnan(result.metrics.theils_u)
        assert result.metrics.mae == 0.0


class TestRunner:
    def test_cv_report(self, tmp_path, synth_small, fast_config):
        report = run_cv("naive", synth_small, fast_config, tmp_path)
        assert [f.fold for f in report.folds] == [0, 1, 2]
        assert [f.train_end for f in report.folds] == [200, 224, 248]
        assert report.aggregate()["theils_u"] == pytest.approx(1.0, abs=1e-12)
        for name in ("naive_cv_metrics.json", "naive_cv_metrics.csv", "summary.log", "error.log"):
            assert (tmp_path / name).exists()
        assert "EXPANDING-WINDOW CV" in (tmp_path / "summary.log").read_text()

    def test_holdout_report(self, tmp_path, synth_small, fast_config):
        report = run_test("naive", synth_small, fast_config, tmp_path)
        assert len(report.folds) == 1
        assert report.folds[0].train_end == len(synth_small) - 24
        data = json.loads((tmp_path / "naive_test_metrics.json").read_text())
        assert data["mode"] == "test"
        assert "runtime_s" not in data

    def test_reports_are_reproducible(self, tmp_path, synth_small, fast_config):
        """Two runs with the same inputs write byte-identical metrics."""
        run_cv("trend", synth_small, fast_config, tmp_path / "a")
        run_cv("trend", synth_small, fast_config, tmp_path / "b")
        for name in ("trend_cv_metrics.json", "trend_cv_metrics.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_worker_pool_matches_serial(self, tmp_path, synth_small, fast_config):
        parallel = fast_config.model_copy(update={"cv": fast_config.cv.model_copy(update={"workers": 2})})
        a = run_cv("naive", synth_small, fast_config, tmp_path / "serial")
        b = run_cv("naive", synth_small, parallel, tmp_path / "pool")
        assert [f.model_dump(exclude={"runtime_s"}) for f in a.folds] == [
            f.model_dump(exclude={"runtime_s"}) for f in b.folds
        ]

    def test_not_enough_rows(self, tmp_path, synth_small, fast_config):
        with pytest.raises(InsufficientRows):
            run_cv("naive", synth_small.slice(0, 250), fast_config, tmp_path)

    def test_results_kept_for_plotting(self, tmp_path, synth_small, fast_config):
        runner = BacktestRunner("naive", fast_config, tmp_path, progress=False)
        try:
            runner.run_cv(synth_small)
        finally:
            runner.close()
        assert len(runner.results) == 3
        assert all(len(r.predicted) == 24 for r in runner.results)
