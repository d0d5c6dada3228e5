"""
Engineered features: fee histograms and the ratios/diversity derived from them,
rolling statistics, lags and the model-facing feature matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import DEFAULT_BIN_EDGES, SEASON, ExogPolicy, FeatureSpec
from .dataset import Dataset
from .errors import LagTooLarge
from .prep import fill_frame, nearest_rank
from .schemas import RAW_INPUT_COLUMNS, TARGET_COLUMN

logger = logging.getLogger("FeatureGen")


@dataclass(frozen=True)
class FeeHistogram:
    bin_edges: np.ndarray
    bin_mass: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        mass = np.asarray(self.bin_mass, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise ValueError("histogram edges must be strictly ascending")
        if len(mass) != len(edges) - 1:
            raise ValueError(f"{len(edges)} edges need {len(edges) - 1} masses, got {len(mass)}")
        if np.any(mass < 0):
            raise ValueError("histogram masses must be >= 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_mass", mass)

    @property
    def total(self) -> float:
        return float(self.bin_mass.sum())


def histogram_from_rates(rates: Sequence[float], edges: Sequence[float] = DEFAULT_BIN_EDGES) -> FeeHistogram:
    """Counts per half-open bin [e_i, e_i+1); values at or past the last edge land in the final bin."""
    edges = np.asarray(edges, dtype=float)
    n_bins = len(edges) - 1
    rates = np.asarray(rates, dtype=float)
    idx = np.clip(np.searchsorted(edges, rates, side="right") - 1, 0, n_bins - 1)
    return FeeHistogram(edges, np.bincount(idx, minlength=n_bins).astype(float))


def fee_ratios(h: FeeHistogram, t_low: float, t_high: float) -> Tuple[float, float, float]:
    """Mass fractions below t_low, between, and at or above t_high (by bin left edge)."""
    total = h.total
    if total == 0:
        return 0.0, 0.0, 0.0
    left = h.bin_edges[:-1]
    low = h.bin_mass[left < t_low].sum()
    high = h.bin_mass[left >= t_high].sum()
    med = total - low - high
    return float(low / total), float(med / total), float(high / total)


def fee_diversity(h: FeeHistogram) -> float:
    """Shannon entropy of the bin distribution normalized by ln(number of bins)."""
    mass = h.bin_mass[h.bin_mass > 0]
    if len(mass) <= 1 or len(h.bin_mass) <= 1:
        return 0.0
    p = mass / mass.sum()
    entropy = float(-(p * np.log(p)).sum())
    return min(1.0, max(0.0, entropy / np.log(len(h.bin_mass))))


def mempool_fee_stats(rates: Sequence[float]) -> Dict[str, float]:
    """Summary statistics of mempool fee rates; all zero for an empty mempool."""
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        keys = ("min_fee_rate", "max_fee_rate", "avg_fee_rate", "median_fee_rate",
                "fee_rate_10th", "fee_rate_90th", "fee_rate_std")
        return dict.fromkeys(keys, 0.0)
    return {
        "min_fee_rate": float(r.min()),
        "max_fee_rate": float(r.max()),
        "avg_fee_rate": float(r.mean()),
        "median_fee_rate": nearest_rank(r, 50),
        "fee_rate_10th": nearest_rank(r, 10),
        "fee_rate_90th": nearest_rank(r, 90),
        "fee_rate_std": float(r.std()),
    }


def histogram_features(rates: Sequence[float], spec: FeatureSpec) -> Dict[str, float]:
    h = histogram_from_rates(rates, spec.bin_edges)
    low, med, high = fee_ratios(h, spec.t_low, spec.t_high)
    return {
        "hist_low_fee_ratio": low,
        "hist_med_fee_ratio": med,
        "hist_high_fee_ratio": high,
        "fee_diversity": fee_diversity(h),
    }


def rolling_stats(series: Sequence[float], w: int) -> Tuple[np.ndarray, np.ndarray]:
    """Trailing mean/std over w values inclusive of the current one; first w-1 are NaN."""
    if w < 2:
        raise ValueError("rolling window must be >= 2")
    s = pd.Series(np.asarray(series, dtype=float))
    roll = s.rolling(window=w, min_periods=w)
    return roll.mean().to_numpy(), roll.std(ddof=0).to_numpy()


def lagged(series: Sequence[float], lags: Sequence[int]) -> np.ndarray:
    """One column per lag, shifted down with leading NaN."""
    s = np.asarray(series, dtype=float)
    out = np.full((len(s), len(lags)), np.nan)
    for j, k in enumerate(lags):
        if k < 1:
            raise ValueError(f"lag must be >= 1, got {k}")
        if k >= len(s):
            raise LagTooLarge(f"lag {k} needs more than {len(s)} rows")
        out[k:, j] = s[:-k]
    return out


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: List[str]
    row_offset: int = 0
    timestamps: Optional[np.ndarray] = None
    meta: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def target_features(y: np.ndarray, window: Optional[int], lags: Sequence[int]) -> Tuple[np.ndarray, List[str]]:
    """
    Rolling stats of the previous ``window`` targets plus lagged targets.

    Row i only sees y[:i].
    """
    blocks: List[np.ndarray] = []
    names: List[str] = []
    if window is not None:
        shifted = np.concatenate(([np.nan], y[:-1])) if len(y) else y
        mean, std = rolling_stats(shifted, window)
        blocks += [mean[:, None], std[:, None]]
        names += [f"rolling_mean_{window}", f"rolling_std_{window}"]
    if lags:
        blocks.append(lagged(y, lags))
        names += [f"lag_{k}" for k in lags]
    if not blocks:
        return np.empty((len(y), 0)), names
    return np.hstack(blocks), names


def build_matrix(d: Dataset, spec: FeatureSpec, target: str = TARGET_COLUMN) -> FeatureMatrix:
    """Columns: raw inputs, rolling mean/std, lags; leading gaps forward/backward filled."""
    raw = d.frame[RAW_INPUT_COLUMNS].to_numpy(dtype=float)
    y = d.column(target)
    engineered, names = target_features(y, spec.rolling_window, spec.lags)
    if engineered.shape[1]:
        engineered = fill_frame(pd.DataFrame(engineered, columns=names)).to_numpy()
    X = np.hstack([raw, engineered])
    logger.debug(f"Built feature matrix {X.shape} from {len(d)} rows")
    return FeatureMatrix(
        X=X,
        y=y,
        columns=[*RAW_INPUT_COLUMNS, *names],
        row_offset=d.row_offset,
        timestamps=d.frame["timestamp"].to_numpy(),
    )


def carry_rows(X: np.ndarray, h: int, policy: ExogPolicy = "seasonal", season: int = SEASON) -> np.ndarray:
    """
    Future exogenous rows for an h-step forecast.

    ``seasonal`` repeats the same slot one season back (row T - season + j mod season);
    ``freeze`` repeats the last row. Seasonal carry falls back to freeze when fewer
    than ``season`` rows are available.
    """
    X = np.asarray(X, dtype=float)
    T = len(X)
    if T == 0:
        raise ValueError("cannot carry rows from an empty matrix")
    if policy == "seasonal" and T >= season:
        idx = T - season + (np.arange(h) % season)
        return X[idx].copy()
    if policy == "seasonal":
        logger.warning(f"Only {T} rows for a season of {season}; freezing last exogenous row")
    return np.repeat(X[-1:], h, axis=0)
