"""
Tests for preprocessing: dedup, gap filling, clipping and standardization.
"""

import math

import numpy as np
import pytest

from feecast.config import ClipSpec, PrepConfig
from feecast.errors import AllMissingColumn, EmptyFitSlice
from feecast.prep import (
    FoldPreprocessor,
    apply_clip,
    apply_standardize,
    dedup,
    fill_missing,
    fit_clip,
    fit_standardize,
    inverse_standardize,
    nearest_rank,
    preprocess,
)
from feecast.schemas import TARGET_COLUMN


class TestNearestRank:
    """Nearest-rank percentiles always return an observed value."""

    def test_one_to_hundred(self):
        values = np.arange(1, 101, dtype=float)
        assert nearest_rank(values, 1) == 1.0
        assert nearest_rank(values, 50) == 50.0
        assert nearest_rank(values, 99) == 99.0

    def test_small_sample(self):
        """Median of {1, 2, 10} is 2 and the 90th percentile is 10."""
        assert nearest_rank([10.0, 1.0, 2.0], 50) == 2.0
        assert nearest_rank([10.0, 1.0, 2.0], 90) == 10.0

    def test_ignores_nan(self):
        assert nearest_rank([math.nan, 3.0, 1.0], 50) == 1.0
        assert math.isnan(nearest_rank([math.nan], 50))


class TestDedupAndFill:
    """Duplicate heights and gaps."""

    def test_dedup_keeps_first(self, synth_small):
        frame = synth_small.frame.head(6).copy()
        frame = frame.iloc[[0, 1, 2, 2, 3, 4]].reset_index(drop=True)
        frame.loc[3, TARGET_COLUMN] = 999.0
        out = dedup(synth_small.with_frame(frame))
        assert len(out) == 5
        assert 999.0 not in out.target
        assert np.all(np.diff(out.column("block_height")) > 0)

    def test_forward_then_backward_fill(self, synth_small):
        """Interior gaps take the previous value; a leading gap takes the first observed one."""
        frame = synth_small.frame.head(6).copy()
        col = "bitcoin_price_usd"
        original = frame[col].to_numpy().copy()
        frame.loc[[0, 3], col] = math.nan
        out = fill_missing(synth_small.with_frame(frame)).column(col)
        assert out[0] == original[1]
        assert out[3] == original[2]
        assert not np.isnan(out).any()

    def test_all_missing_column_fails(self, synth_small):
        frame = synth_small.frame.head(4).copy()
        frame["difficulty"] = math.nan
        with pytest.raises(AllMissingColumn) as exc:
            fill_missing(synth_small.with_frame(frame))
        assert exc.value.name == "difficulty"

    def test_integer_columns_stay_integer(self, synth_small):
        out = fill_missing(synth_small.slice(0, 10))
        assert out.frame["block_height"].dtype.kind == "i"


class TestClip:
    """Percentile clipping fitted on one slice."""

    def test_bounds_are_observed_percentiles(self, synth_small):
        stats = fit_clip(synth_small, ClipSpec())
        lo, hi = stats.values["tx_count"]
        data = synth_small.column("tx_count")
        assert lo == nearest_rank(data, 1)
        assert hi == nearest_rank(data, 99)

    def test_target_and_identifiers_never_clipped(self, synth_small):
        stats = fit_clip(synth_small, ClipSpec())
        for name in (TARGET_COLUMN, "block_height", "block_version"):
            assert name not in stats.values

    def test_override_per_column(self, synth_small):
        spec = ClipSpec(overrides={"tx_count": (10.0, 90.0)})
        lo, hi = fit_clip(synth_small, spec).values["tx_count"]
        assert hi == nearest_rank(synth_small.column("tx_count"), 90)

    def test_apply_clip_bounds_values(self, synth_small):
        stats = fit_clip(synth_small, ClipSpec(lower_pct=10, upper_pct=90))
        out = apply_clip(synth_small, stats)
        lo, hi = stats.values["tx_count"]
        tx = out.column("tx_count")
        assert tx.min() >= lo and tx.max() <= hi
        np.testing.assert_array_equal(out.target, synth_small.target)

    def test_row_range_and_precedes(self, synth_small):
        """Stats fitted on rows [0, 200) precede a slice starting at 200 but not one at 150."""
        stats = fit_clip(synth_small.slice(0, 200), ClipSpec())
        assert stats.row_range == (0, 200)
        assert stats.precedes(synth_small.slice(200, 300))
        assert not stats.precedes(synth_small.slice(150, 300))

    def test_empty_slice(self, synth_small):
        with pytest.raises(EmptyFitSlice):
            fit_clip(synth_small.slice(0, 0), ClipSpec())


class TestFoldPreprocessor:
    def test_fit_on_train_only(self, synth_small):
        """Clip bounds come from the training rows even when applied to later rows."""
        train, test = synth_small.slice(0, 200), synth_small.slice(200, 260)
        prep = FoldPreprocessor(PrepConfig()).fit(train)
        assert prep.clip_stats == fit_clip(train, PrepConfig().clip)
        assert prep.clip_stats.precedes(test)
        assert len(prep.transform(test)) == 60

    def test_transform_before_fit(self, synth_small):
        with pytest.raises(RuntimeError):
            FoldPreprocessor(PrepConfig()).transform(synth_small)


class TestStandardize:
    def test_zero_mean_unit_std(self, synth_small):
        stats = fit_standardize(synth_small)
        out = apply_standardize(synth_small, stats)
        tx = out.column("tx_count")
        assert abs(tx.mean()) < 1e-9
        assert abs(tx.std() - 1.0) < 1e-9

    def test_constant_column_maps_to_zero(self, synth_small):
        """block_version never changes in synthetic data."""
        out = apply_standardize(synth_small, fit_standardize(synth_small))
        assert np.all(out.column("block_version") == 0.0)

    def test_inverse(self, synth_small):
        stats = fit_standardize(synth_small, ["tx_count", "hash_rate"])
        back = inverse_standardize(apply_standardize(synth_small, stats), stats)
        np.testing.assert_allclose(back.column("hash_rate"), synth_small.column("hash_rate"), rtol=1e-12)


class TestPreprocess:
    def test_pipeline_is_deterministic(self, synth_small):
        a = preprocess(synth_small, PrepConfig())
        b = preprocess(synth_small, PrepConfig())
        assert a.frame.equals(b.frame)
        assert len(a) == len(synth_small)
