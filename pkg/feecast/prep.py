"""
Deterministic preprocessing: de-duplication, forward/backward fill, percentile
clipping and standardization.

Clip bounds and standardization moments are fitted on a training slice and carry
that slice's absolute row range, so callers can assert they never saw the rows
they are applied to.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import ClipSpec, PrepConfig
from .dataset import Dataset
from .errors import AllMissingColumn, EmptyFitSlice
from .schemas import FEATURE_COLUMNS, INTEGER_COLUMNS, TARGET_COLUMN

logger = logging.getLogger("Prep")


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile, ignoring NaN."""
    arr = np.asarray(values, dtype=float)
    if np.all(np.isnan(arr)):
        return float("nan")
    return float(np.nanpercentile(arr, pct, method="inverted_cdf"))


@dataclass(frozen=True)
class ColumnStats:
    """Per-column pairs fitted on rows ``row_range[0]:row_range[1]``.

    For ``kind == "clip"`` a pair is (lower, upper); for ``"standardize"`` it is (mean, std).
    """

    kind: Literal["clip", "standardize"]
    values: Dict[str, Tuple[float, float]]
    row_range: Tuple[int, int]

    def precedes(self, d: Dataset) -> bool:
        """True when every fitted row lies strictly before the first row of ``d``."""
        return self.row_range[1] <= d.row_offset

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": {k: list(v) for k, v in self.values.items()}, "row_range": list(self.row_range)}

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnStats":
        return cls(
            kind=data["kind"],
            values={k: (float(v[0]), float(v[1])) for k, v in data["values"].items()},
            row_range=(int(data["row_range"][0]), int(data["row_range"][1])),
        )


# identifiers; percentile clipping would merge distinct heights
NEVER_CLIPPED = ("block_height", "block_version")


def _feature_columns(columns: Optional[Sequence[str]], exclude: Sequence[str] = ()) -> List[str]:
    if columns is not None:
        return [c for c in columns if c != TARGET_COLUMN]
    return [c for c in FEATURE_COLUMNS if c not in exclude]


def dedup(d: Dataset) -> Dataset:
    """Keep the first row per block_height, preserving order."""
    frame = d.frame.drop_duplicates(subset="block_height", keep="first")
    dropped = len(d) - len(frame)
    if dropped:
        logger.info(f"Removed {dropped} duplicate block heights")
    return d.with_frame(frame)


def fill_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Forward-fill then backward-fill every column; an all-missing column is an error."""
    if len(frame) == 0:
        return frame
    for name in frame.columns:
        if frame[name].isna().all():
            raise AllMissingColumn(name)
    return frame.ffill().bfill()


def fill_missing(d: Dataset) -> Dataset:
    filled = fill_frame(d.frame.astype(float))
    for col in INTEGER_COLUMNS:
        if col in filled.columns and len(filled):
            filled[col] = filled[col].astype(np.int64)
    return d.with_frame(filled)


def fit_clip(d: Dataset, spec: ClipSpec, columns: Optional[Sequence[str]] = None) -> ColumnStats:
    """Nearest-rank percentile bounds per column. The target is never clipped."""
    if len(d) == 0:
        raise EmptyFitSlice("cannot fit clip bounds on an empty slice")
    values = {}
    for col in _feature_columns(columns, exclude=NEVER_CLIPPED):
        lo_pct, hi_pct = spec.bounds_for(col)
        data = d.column(col)
        values[col] = (nearest_rank(data, lo_pct), nearest_rank(data, hi_pct))
    return ColumnStats(kind="clip", values=values, row_range=(d.row_offset, d.row_offset + len(d)))


def apply_clip(d: Dataset, stats: ColumnStats) -> Dataset:
    frame = d.frame.copy()
    for col, (lo, hi) in stats.values.items():
        if np.isnan(lo) or np.isnan(hi):
            continue
        clipped = frame[col].clip(lower=lo, upper=hi)
        frame[col] = clipped.astype(frame[col].dtype) if col in INTEGER_COLUMNS else clipped
    return d.with_frame(frame)


def fit_standardize(d: Dataset, columns: Optional[Sequence[str]] = None) -> ColumnStats:
    if len(d) == 0:
        raise EmptyFitSlice("cannot fit standardization on an empty slice")
    values = {}
    for col in _feature_columns(columns):
        data = d.column(col)
        values[col] = (float(np.nanmean(data)), float(np.nanstd(data)))
    return ColumnStats(kind="standardize", values=values, row_range=(d.row_offset, d.row_offset + len(d)))


def apply_standardize(d: Dataset, stats: ColumnStats) -> Dataset:
    """z = (x - mean) / std; zero-variance columns map to 0."""
    frame = d.frame.copy()
    for col, (mean, std) in stats.values.items():
        x = frame[col].astype(float)
        frame[col] = (x - mean) / std if std > 0 else x * 0.0
    return d.with_frame(frame)


def inverse_standardize(d: Dataset, stats: ColumnStats) -> Dataset:
    frame = d.frame.copy()
    for col, (mean, std) in stats.values.items():
        frame[col] = frame[col].astype(float) * std + mean
    return d.with_frame(frame)


def preprocess(d: Dataset, cfg: PrepConfig) -> Dataset:
    """dedup -> fill -> clip, with clip bounds fitted on the whole dataset."""
    out = fill_missing(dedup(d))
    if len(out) == 0:
        return out
    stats = fit_clip(out, cfg.clip, cfg.clip_columns)
    return apply_clip(out, stats)


@dataclass
class FoldPreprocessor:
    """Clip bounds fitted on one training slice, applied to any later slice."""

    cfg: PrepConfig
    clip_stats: Optional[ColumnStats] = None

    def fit(self, train: Dataset) -> "FoldPreprocessor":
        self.clip_stats = fit_clip(train, self.cfg.clip, self.cfg.clip_columns)
        return self

    def transform(self, d: Dataset) -> Dataset:
        if self.clip_stats is None:
            raise RuntimeError("FoldPreprocessor.transform called before fit")
        return apply_clip(d, self.clip_stats)
