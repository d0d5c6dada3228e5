"""
Tests for error metrics, fold construction, correlations and model comparison.
"""

import json
import math

import numpy as np
import pytest
from sklearn.metrics import mean_absolute_error, mean_squared_error

from feecast.errors import ConstantActuals, EmptyInput, InsufficientRows, LengthMismatch, TooFewRows
from feecast.evaluation import (
    FoldMetrics,
    MetricsReport,
    comparison_table,
    correlation_matrix,
    expanding_folds,
    holdout_fold,
    mae,
    naive_path,
    rmse,
    theils_u,
    top_correlations,
    write_comparison,
)
from feecast.schemas import TARGET_COLUMN


class TestMetrics:
    def test_against_sklearn(self, rng):
        y, y_hat = rng.normal(size=200), rng.normal(size=200)
        assert mae(y, y_hat) == pytest.approx(mean_absolute_error(y, y_hat), rel=1e-12)
        assert rmse(y, y_hat) == pytest.approx(np.sqrt(mean_squared_error(y, y_hat)), rel=1e-12)

    def test_small_example(self):
        assert mae([1, 2, 3], [2, 2, 5]) == 1.0
        assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))

    def test_naive_forecast_scores_one(self, rng):
        """Theil's U of the lag-1 forecast itself is exactly 1."""
        y = rng.normal(size=50).cumsum()
        anchor = 0.3
        assert theils_u(y, naive_path(y, anchor), anchor) == pytest.approx(1.0, abs=1e-12)

    def test_perfect_forecast_scores_zero(self, rng):
        y = rng.normal(size=20)
        assert theils_u(y, y, anchor=0.0) == 0.0

    def test_scale_invariance(self, rng):
        y, y_hat = rng.normal(size=40), rng.normal(size=40)
        assert theils_u(7.0 * y, 7.0 * y_hat, 7.0 * 0.5) == pytest.approx(theils_u(y, y_hat, 0.5), rel=1e-12)

    def test_constant_actuals(self):
        with pytest.raises(ConstantActuals):
            theils_u([2.0, 2.0, 2.0], [1.0, 2.0, 3.0], anchor=2.0)

    def test_input_errors(self):
        with pytest.raises(LengthMismatch):
            mae([1.0, 2.0], [1.0])
        with pytest.raises(EmptyInput):
            rmse([], [])


class TestFolds:
    def test_expanding_boundaries(self):
        """9665 initial rows, five daily folds of 144 blocks."""
        folds = expanding_folds(10385, 9665, 144, 144, 5)
        assert [(f.train_end, f.test_end) for f in folds] == [
            (9665, 9809),
            (9809, 9953),
            (9953, 10097),
            (10097, 10241),
            (10241, 10385),
        ]
        assert all(f.horizon == 144 for f in folds)
        assert folds[2].to_dict() == {"fold": 2, "train": [0, 9953], "test": [9953, 10097]}

    def test_one_row_short(self):
        with pytest.raises(InsufficientRows):
            expanding_folds(10384, 9665, 144, 144, 5)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            expanding_folds(100, 10, 0, 5, 2)

    def test_holdout(self):
        fold = holdout_fold(1000, 144)
        assert (fold.train_end, fold.test_end) == (856, 1000)
        with pytest.raises(InsufficientRows):
            holdout_fold(144, 144)


class TestCorrelation:
    def test_diagonal_and_symmetry(self, synth_small):
        m = correlation_matrix(synth_small)
        assert np.all(np.diag(m.r) == 1.0)
        np.testing.assert_array_equal(m.r, m.r.T)
        assert np.all(np.abs(m.r) <= 1.0)

    def test_matches_pandas(self, synth_small):
        cols = ["tx_count", "avg_fee_rate", TARGET_COLUMN]
        m = correlation_matrix(synth_small, cols)
        expected = synth_small.frame[cols].corr().to_numpy()
        np.testing.assert_allclose(m.r, expected, atol=1e-10)

    def test_constant_column(self, synth_small):
        """block_version never changes: r is 0 against everything else."""
        m = correlation_matrix(synth_small)
        assert "block_version" in m.constant
        assert m.get("block_version", TARGET_COLUMN) == 0.0
        assert m.get("block_version", "block_version") == 1.0

    def test_single_gap_uses_remaining_rows(self, synth_small):
        """One missing cell does not zero out the column; it is flagged as gapped."""
        cols = ["avg_fee_rate", "fee_rate_90th"]
        before = correlation_matrix(synth_small, cols).get(*cols)
        frame = synth_small.frame.copy()
        frame.loc[7, "avg_fee_rate"] = math.nan
        m = correlation_matrix(synth_small.with_frame(frame), cols)
        assert m.gapped == ["avg_fee_rate"]
        assert m.constant == []
        assert m.get(*cols) == pytest.approx(before, abs=0.05)
        expected = frame[cols].corr().to_numpy()[0, 1]
        assert m.get(*cols) == pytest.approx(expected, abs=1e-10)

    def test_all_missing_column_is_constant(self, synth_small):
        frame = synth_small.frame.copy()
        frame["bitcoin_price_usd"] = math.nan
        m = correlation_matrix(synth_small.with_frame(frame), ["bitcoin_price_usd", TARGET_COLUMN])
        assert m.constant == ["bitcoin_price_usd"]
        assert m.get("bitcoin_price_usd", TARGET_COLUMN) == 0.0
        assert m.get("bitcoin_price_usd", "bitcoin_price_usd") == 1.0

    def test_perfectly_correlated(self, synth_small):
        frame = synth_small.frame.copy()
        frame["difficulty"] = -2.0 * frame["tx_count"]
        m = correlation_matrix(synth_small.with_frame(frame), ["tx_count", "difficulty"])
        assert m.get("tx_count", "difficulty") == pytest.approx(-1.0)

    def test_top_pairs(self, synth_small):
        m = correlation_matrix(synth_small)
        top = top_correlations(m, 5)
        assert len(top) == 5
        strengths = [abs(r) for _, _, r in top]
        assert strengths == sorted(strengths, reverse=True)
        assert all(a != b for a, b, _ in top)

    def test_too_few_rows(self, synth_small):
        with pytest.raises(TooFewRows):
            correlation_matrix(synth_small.slice(0, 1))


def _report(model: str, mode: str, maes):
    folds = [
        FoldMetrics(fold=i, train_end=100 + i, test_end=110 + i, mae=v, rmse=v * 1.5, theils_u=v / 10)
        for i, v in enumerate(maes)
    ]
    return MetricsReport(model=model, mode=mode, folds=folds, runtime_s=1.0)


class TestReportsAndComparison:
    def test_aggregate_is_fold_mean(self):
        agg = _report("m", "cv", [1.0, 2.0, 6.0]).aggregate()
        assert agg["mae"] == 3.0
        assert agg["rmse"] == 4.5

    def test_aggregate_skips_undefined_u(self):
        report = _report("m", "cv", [1.0, 3.0])
        report.folds[0].theils_u = math.nan
        assert report.aggregate()["theils_u"] == pytest.approx(0.3)

    def test_timings_excluded_by_default(self, tmp_path):
        paths = _report("naive", "cv", [1.0]).write(tmp_path)
        data = json.loads(paths["json"].read_text())
        assert "runtime_s" not in data
        assert "runtime_s" not in data["folds"][0]
        assert "runtime_s" not in paths["csv"].read_text()
        assert paths["json"].name == "naive_cv_metrics.json"

    def test_timings_included_on_request(self, tmp_path):
        paths = _report("naive", "cv", [1.0]).write(tmp_path, include_timings=True)
        assert json.loads(paths["json"].read_text())["runtime_s"] == 1.0

    def test_comparison_ranked_by_cv_mae(self, tmp_path):
        cv = {"a": _report("a", "cv", [3.0]), "b": _report("b", "cv", [1.0]), "c": _report("c", "cv", [2.0])}
        test = {name: _report(name, "test", [0.5]) for name in cv}
        table = comparison_table(cv, test)
        assert table["model"].tolist() == ["b", "c", "a"]
        assert table["rank"].tolist() == [1, 2, 3]
        assert table.loc[0, "test_mae"] == 0.5

        csv_path, json_path = write_comparison(table, tmp_path)
        assert csv_path.exists()
        assert json.loads(json_path.read_text())["rankings"][0]["model"] == "b"
