"""
Tests for the canonical dataset: CSV persistence and invariant checks.
"""

import math

import numpy as np
import pytest

from feecast.dataset import Dataset, describe, from_columns, load_dataset, save_dataset, validate
from feecast.errors import EmptyFile, IoFailure, MalformedNumber, MissingColumn
from feecast.schemas import CANONICAL_COLUMNS, TARGET_COLUMN


def _frames_equal(a: Dataset, b: Dataset) -> bool:
    x = a.frame.to_numpy(dtype=float)
    y = b.frame.to_numpy(dtype=float)
    return x.shape == y.shape and np.array_equal(x, y, equal_nan=True)


class TestCsvRoundTrip:
    """Saving then loading must reproduce every value exactly."""

    def test_synthetic_round_trip(self, tmp_path, synth_small):
        """Shortest round-trip float formatting loses nothing."""
        path = tmp_path / "d.csv"
        save_dataset(synth_small, path)
        loaded = load_dataset(path)
        assert list(loaded.frame.columns) == CANONICAL_COLUMNS
        assert _frames_equal(loaded, synth_small)
        assert loaded.provenance == "file"

    def test_full_precision_round_trip(self, tmp_path, rng):
        """Arbitrary doubles across many magnitudes come back bit for bit."""
        n, k = 2000, len(CANONICAL_COLUMNS)
        values = rng.uniform(-1, 1, (n, k)) * 10.0 ** rng.uniform(-12, 18, (n, k))
        values[:, CANONICAL_COLUMNS.index("timestamp")] = rng.integers(0, 2**40, n)
        values[:, CANONICAL_COLUMNS.index("block_height")] = np.arange(n)
        values[:, CANONICAL_COLUMNS.index("block_version")] = rng.integers(0, 2**31, n)
        d = from_columns(CANONICAL_COLUMNS, values, provenance="file")
        path = tmp_path / "precise.csv"
        save_dataset(d, path)
        loaded = load_dataset(path)
        for col in CANONICAL_COLUMNS:
            np.testing.assert_array_equal(loaded.column(col), d.column(col), err_msg=col)

    def test_missing_values_are_empty_cells(self, tmp_path, synth_small):
        """NaN is written as an empty field and read back as NaN."""
        frame = synth_small.frame.head(5).copy()
        frame.loc[2, "bitcoin_price_usd"] = math.nan
        path = tmp_path / "gap.csv"
        save_dataset(synth_small.with_frame(frame), path)

        row = path.read_text().splitlines()[3].split(",")
        assert row[CANONICAL_COLUMNS.index("bitcoin_price_usd")] == ""
        assert math.isnan(load_dataset(path).column("bitcoin_price_usd")[2])

    def test_header_only_file_is_empty_dataset(self, tmp_path):
        """A header with no rows is a valid, empty dataset."""
        path = tmp_path / "empty.csv"
        path.write_text(",".join(CANONICAL_COLUMNS) + "\n")
        assert len(load_dataset(path)) == 0

    def test_extra_columns_ignored(self, tmp_path, synth_small):
        """Unknown trailing columns are dropped on load."""
        path = tmp_path / "d.csv"
        save_dataset(synth_small.slice(0, 3), path)
        lines = path.read_text().splitlines()
        lines = [lines[0] + ",note"] + [line + ",x" for line in lines[1:]]
        path.write_text("\n".join(lines) + "\n")
        assert list(load_dataset(path).frame.columns) == CANONICAL_COLUMNS


class TestLoadErrors:
    """Malformed inputs raise typed errors."""

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_dataset(tmp_path / "nope.csv")

    def test_zero_byte_file(self, tmp_path):
        path = tmp_path / "zero.csv"
        path.write_text("")
        with pytest.raises(EmptyFile):
            load_dataset(path)

    def test_missing_column(self, tmp_path):
        """Dropping the target column is reported by name."""
        path = tmp_path / "short.csv"
        path.write_text(",".join(CANONICAL_COLUMNS[:-1]) + "\n")
        with pytest.raises(MissingColumn) as exc:
            load_dataset(path)
        assert exc.value.name == TARGET_COLUMN

    def test_malformed_number_reports_location(self, tmp_path, synth_small):
        """The first unparsable cell is reported with its row and column."""
        path = tmp_path / "bad.csv"
        save_dataset(synth_small.slice(0, 4), path)
        lines = path.read_text().splitlines()
        cells = lines[2].split(",")
        col = CANONICAL_COLUMNS.index("tx_count")
        cells[col] = "lots"
        lines[2] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")

        with pytest.raises(MalformedNumber) as exc:
            load_dataset(path)
        assert exc.value.row == 1
        assert exc.value.col == "tx_count"


class TestValidate:
    """Invariant checks return violations instead of raising."""

    def test_synthetic_data_is_valid(self, synth_small):
        report = validate(synth_small)
        assert report.ok, report.violations[:3]

    def test_percentile_order_violation(self, synth_small):
        frame = synth_small.frame.head(10).copy()
        frame.loc[4, "fee_rate_10th"] = frame.loc[4, "fee_rate_90th"] + 1.0
        report = validate(synth_small.with_frame(frame))
        assert "percentile_order" in report.rules()
        assert [v.row for v in report.violations if v.rule == "percentile_order"] == [4]

    def test_ratio_sum_violation(self, synth_small):
        frame = synth_small.frame.head(10).copy()
        frame.loc[0, "hist_low_fee_ratio"] = 0.9
        frame.loc[0, "hist_med_fee_ratio"] = 0.9
        frame.loc[0, "hist_high_fee_ratio"] = 0.0
        assert "ratio_sum" in validate(synth_small.with_frame(frame)).rules()

    def test_negative_fee(self, synth_small):
        frame = synth_small.frame.head(3).copy()
        frame.loc[1, TARGET_COLUMN] = -1.0
        assert "fee_nonnegative" in validate(synth_small.with_frame(frame)).rules()

    def test_duplicate_height_breaks_order(self, synth_small):
        """A repeated block height violates strict height ordering."""
        frame = synth_small.frame.head(5).copy()
        frame.loc[3, "block_height"] = frame.loc[2, "block_height"]
        assert "height_order" in validate(synth_small.with_frame(frame)).rules()

    def test_missing_values_are_not_violations(self, synth_small):
        """Rows with NaN mempool fields (backfilled blocks) still validate."""
        frame = synth_small.frame.head(5).copy()
        frame.loc[2, ["fee_rate_10th", "median_fee_rate", "hist_low_fee_ratio"]] = math.nan
        assert validate(synth_small.with_frame(frame)).ok


class TestDatasetContainer:
    """Slicing and summaries."""

    def test_slice_keeps_absolute_offset(self, synth_small):
        part = synth_small.slice(100, 200).slice(10, 20)
        assert part.row_offset == 110
        assert len(part) == 10
        np.testing.assert_array_equal(part.target, synth_small.target[110:120])

    def test_target_is_last_column(self, synth_small):
        np.testing.assert_array_equal(synth_small.target, synth_small.column(TARGET_COLUMN))

    def test_records_round_trip(self, synth_small):
        """Records rebuilt into a dataset reproduce the frame."""
        part = synth_small.slice(0, 5)
        rebuilt = Dataset.from_records(part.records, provenance="file")
        assert _frames_equal(rebuilt, part)

    def test_describe(self, synth_small):
        stats = describe(synth_small)
        assert list(stats.columns) == ["count", "mean", "std", "min", "max"]
        assert stats.loc["block_height", "count"] == len(synth_small)
