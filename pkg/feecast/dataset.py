"""
Canonical fee dataset: in-memory container, CSV persistence and invariant checks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyFile, IoFailure, MalformedNumber, MissingColumn
from .schemas import (
    CANONICAL_COLUMNS,
    INTEGER_COLUMNS,
    FeeRecord,
    Provenance,
    ValidationReport,
    Violation,
)

logger = logging.getLogger("Dataset")

RATIO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Dataset:
    """
    Ordered collection of fee records backed by a DataFrame in canonical column order.

    ``row_offset`` is the position of the first row in the dataset this one was
    sliced from, so fitted statistics can report which rows they saw.
    """

    frame: pd.DataFrame
    provenance: Provenance = "file"
    row_offset: int = 0
    column_names: List[str] = field(default_factory=lambda: list(CANONICAL_COLUMNS))

    def __post_init__(self):
        if list(self.frame.columns) != list(self.column_names):
            object.__setattr__(self, "frame", self.frame.reindex(columns=self.column_names))

    @classmethod
    def empty(cls, provenance: Provenance = "file") -> "Dataset":
        return cls(_empty_frame(), provenance=provenance)

    @classmethod
    def from_records(cls, records: Iterable[FeeRecord], provenance: Provenance = "live") -> "Dataset":
        rows = [r.model_dump() for r in records]
        if not rows:
            return cls.empty(provenance)
        return cls(pd.DataFrame(rows, columns=CANONICAL_COLUMNS), provenance=provenance)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def records(self) -> List[FeeRecord]:
        return [FeeRecord(**row) for row in _python_rows(self.frame)]

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy(dtype=float)

    @property
    def target(self) -> np.ndarray:
        return self.column(CANONICAL_COLUMNS[-1])

    def slice(self, start: int, stop: int) -> "Dataset":
        """Rows [start, stop) as a new Dataset remembering its absolute offset."""
        part = self.frame.iloc[start:stop].reset_index(drop=True)
        return Dataset(part, provenance=self.provenance, row_offset=self.row_offset + start)

    def with_frame(self, frame: pd.DataFrame) -> "Dataset":
        return Dataset(frame.reset_index(drop=True), provenance=self.provenance, row_offset=self.row_offset)

    def append(self, record: FeeRecord) -> "Dataset":
        row = pd.DataFrame([record.model_dump()], columns=CANONICAL_COLUMNS)
        frame = row if len(self.frame) == 0 else pd.concat([self.frame, row], ignore_index=True)
        return self.with_frame(frame)


def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame({c: pd.Series(dtype=float) for c in CANONICAL_COLUMNS})


def _python_rows(frame: pd.DataFrame):
    for row in frame.to_dict(orient="records"):
        out = {}
        for k, v in row.items():
            if k in INTEGER_COLUMNS:
                out[k] = int(v)
            else:
                out[k] = float(v)
        yield out


def _format_value(column: str, value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if column in INTEGER_COLUMNS:
        return str(int(value))
    # repr gives the shortest string that round-trips
    return repr(float(value))


def _parse_column(col: str, cells: pd.Series) -> pd.Series:
    # float() is correctly rounded, so repr-written values come back bit for bit
    values = np.empty(len(cells))
    for row, cell in enumerate(cells):
        text = cell.strip()
        if not text:
            values[row] = np.nan
            continue
        try:
            values[row] = float(text)
        except ValueError:
            raise MalformedNumber(row, col, cell)
    return pd.Series(values, index=cells.index)


def load_dataset(path: str | Path) -> Dataset:
    """
    Read a canonical CSV. Extra columns are ignored; the canonical ones must appear
    in canonical order. Empty cells load as NaN.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise IoFailure(f"File not found: {path}")
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty (a header row is required)")

    header = list(raw.columns)
    for name in CANONICAL_COLUMNS:
        if name not in header:
            raise MissingColumn(name)
    positions = [header.index(c) for c in CANONICAL_COLUMNS]
    if positions != sorted(positions):
        raise MissingColumn(f"canonical columns out of order in {path}")
    extra = [c for c in header if c not in CANONICAL_COLUMNS]
    if extra:
        logger.debug(f"Ignoring extra columns: {', '.join(extra)}")

    frame = pd.DataFrame(index=range(len(raw)))
    for col in CANONICAL_COLUMNS:
        values = _parse_column(col, raw[col])
        if col in INTEGER_COLUMNS and not values.isna().any():
            frame[col] = values.astype(np.int64)
        else:
            frame[col] = values.astype(float)
    if len(frame) == 0:
        frame = _empty_frame()
    return Dataset(frame, provenance="file")


def save_dataset(d: Dataset, path: str | Path) -> None:
    """Write canonical header plus one row per record, floats in shortest round-trip form."""
    path = Path(path)
    lines = [",".join(CANONICAL_COLUMNS)]
    columns = [d.frame[c].to_numpy() for c in CANONICAL_COLUMNS]
    for i in range(len(d)):
        lines.append(",".join(_format_value(c, col[i].item()) for c, col in zip(CANONICAL_COLUMNS, columns)))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write {path}: {e}")


def format_row(record: FeeRecord) -> str:
    """One CSV line for ``record`` in canonical order (used by append-only sinks)."""
    values = record.model_dump()
    return ",".join(_format_value(c, values[c]) for c in CANONICAL_COLUMNS)


def _present(*values: float) -> bool:
    return all(not math.isnan(v) for v in values)


def _check_record(i: int, r: dict) -> List[Violation]:
    found: List[Violation] = []
    rates = [
        "min_fee_rate", "max_fee_rate", "avg_fee_rate", "median_fee_rate",
        "fee_rate_10th", "fee_rate_90th", "fee_rate_std", "block_median_fee_rate",
    ]
    for name in rates:
        if _present(r[name]) and r[name] < 0:
            found.append(Violation(row=i, rule="fee_nonnegative", detail=name))

    p10, med, p90 = r["fee_rate_10th"], r["median_fee_rate"], r["fee_rate_90th"]
    if _present(p10, med, p90) and not (p10 <= med <= p90):
        found.append(Violation(row=i, rule="percentile_order", detail=f"{p10} <= {med} <= {p90}"))

    lo, avg, hi = r["min_fee_rate"], r["avg_fee_rate"], r["max_fee_rate"]
    if _present(lo, avg, hi) and not (lo <= avg <= hi):
        found.append(Violation(row=i, rule="minmax_order", detail=f"{lo} <= {avg} <= {hi}"))

    ratios = (r["hist_low_fee_ratio"], r["hist_med_fee_ratio"], r["hist_high_fee_ratio"])
    if _present(*ratios):
        if any(x < 0 or x > 1 for x in ratios):
            found.append(Violation(row=i, rule="ratio_range", detail=str(ratios)))
        if any(x != 0 for x in ratios) and abs(sum(ratios) - 1.0) > RATIO_TOLERANCE:
            found.append(Violation(row=i, rule="ratio_sum", detail=f"sum={sum(ratios)}"))

    div = r["fee_diversity"]
    if _present(div) and not (0.0 <= div <= 1.0):
        found.append(Violation(row=i, rule="diversity_range", detail=str(div)))
    return found


def validate(d: Dataset) -> ValidationReport:
    """Check every FeeRecord invariant; violations are returned, never raised."""
    violations: List[Violation] = []
    rows = d.frame.to_dict(orient="records")
    prev = None
    for i, r in enumerate(rows):
        r = {k: float(v) for k, v in r.items()}
        violations.extend(_check_record(i, r))
        if prev is not None:
            if not r["block_height"] > prev["block_height"]:
                violations.append(Violation(row=i, rule="height_order", detail=str(r["block_height"])))
            if r["timestamp"] < prev["timestamp"]:
                violations.append(Violation(row=i, rule="timestamp_order", detail=str(r["timestamp"])))
        prev = r
    return ValidationReport(violations=violations)


def describe(d: Dataset) -> pd.DataFrame:
    """Per-column count/mean/std/min/max."""
    stats = d.frame.astype(float).agg(["count", "mean", "std", "min", "max"]).T
    stats.index.name = "column"
    return stats


def from_columns(columns: Sequence[str], values: np.ndarray, provenance: Provenance = "synthetic") -> Dataset:
    frame = pd.DataFrame(values, columns=list(columns))
    for col in INTEGER_COLUMNS:
        frame[col] = frame[col].astype(np.int64)
    return Dataset(frame, provenance=provenance)
