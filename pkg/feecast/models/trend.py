"""
Piecewise-linear trend with changepoints plus Fourier daily seasonality,
fitted by ridge regression.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..config import TrendConfig
from ..dataset import Dataset
from ..errors import TooFewRows
from ..numerics import ridge_solve
from .base import ForecastSeries, Forecaster, check_horizon

logger = logging.getLogger("Trend")


def place_changepoints(t: np.ndarray, n_changepoints: int, changepoint_range: float) -> np.ndarray:
    """Evenly spaced changepoints over the first ``changepoint_range`` of the history."""
    hist_size = int(np.floor(len(t) * changepoint_range))
    n = min(n_changepoints, max(hist_size - 1, 0))
    if n < n_changepoints:
        logger.info(f"n_changepoints greater than number of observations. Using {n}.")
    if n == 0:
        return np.empty(0)
    idx = np.linspace(0, hist_size - 1, n + 1).round().astype(int)[1:]
    return np.asarray(t, dtype=float)[idx]


@dataclass
class TimeScale:
    t0: float
    span: float

    @classmethod
    def fit(cls, t: np.ndarray) -> "TimeScale":
        t = np.asarray(t, dtype=float)
        span = float(t.max() - t.min()) if len(t) > 1 else 1.0
        return cls(float(t.min()), span if span > 0 else 1.0)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return (np.asarray(t, dtype=float) - self.t0) / self.span


def design_matrix(
    t: Sequence[float],
    cfg: TrendConfig,
    scale: Optional[TimeScale] = None,
    changepoints: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Columns: 1, scaled t, one hinge per changepoint, then sin/cos pairs for k = 1..K
    on the raw block index with period ``cfg.period``.
    """
    t = np.asarray(t, dtype=float)
    if scale is None:
        scale = TimeScale.fit(t)
    if changepoints is None:
        changepoints = place_changepoints(t, cfg.n_changepoints, cfg.changepoint_range)
    tau = scale(t)
    cols = [np.ones_like(t), tau]
    cols += [np.maximum(0.0, tau - c) for c in scale(changepoints)]
    for k in range(1, cfg.fourier_order + 1):
        angle = 2.0 * np.pi * k * t / cfg.period
        cols += [np.sin(angle), np.cos(angle)]
    return np.column_stack(cols)


@dataclass
class TrendModel:
    cfg: TrendConfig
    scale: TimeScale
    changepoints: np.ndarray
    y_mean: float
    beta: np.ndarray

    @property
    def slope(self) -> float:
        """Base slope per block."""
        return float(self.beta[1] / self.scale.span)

    def predict(self, t: Sequence[float]) -> np.ndarray:
        return self.y_mean + design_matrix(t, self.cfg, self.scale, self.changepoints) @ self.beta

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t0": self.scale.t0,
            "span": self.scale.span,
            "changepoints": self.changepoints.tolist(),
            "y_mean": self.y_mean,
            "beta": self.beta.tolist(),
        }


def fit_trend(y: Sequence[float], t: Sequence[float], cfg: TrendConfig) -> TrendModel:
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    scale = TimeScale.fit(t)
    changepoints = place_changepoints(t, cfg.n_changepoints, cfg.changepoint_range)
    D = design_matrix(t, cfg, scale, changepoints)
    if len(y) < D.shape[1]:
        raise TooFewRows(f"{len(y)} rows for {D.shape[1]} trend/seasonality columns")
    y_mean = float(y.mean())
    beta = ridge_solve(D, y - y_mean, cfg.ridge_lambda)
    return TrendModel(cfg, scale, changepoints, y_mean, beta)


class TrendForecaster(Forecaster):
    name = "trend"

    def __init__(self, cfg: TrendConfig):
        self.cfg = cfg
        self.model: Optional[TrendModel] = None
        self.start = 0

    def fit(self, train: Dataset) -> "TrendForecaster":
        t = train.row_offset + np.arange(len(train))
        self.model = fit_trend(train.target, t, self.cfg)
        self.start = train.row_offset + len(train)
        logger.debug(f"Trend fit on {len(train)} rows, slope {self.model.slope:.4g}/block")
        return self

    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        check_horizon(h)
        t = self.start + np.arange(h)
        return ForecastSeries(self.name, self.start, self.model.predict(t))

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(config=self.cfg.model_dump(), start=self.start, fitted=self.model.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrendForecaster":
        cfg = TrendConfig(**data["config"])
        fitted = data["fitted"]
        out = cls(cfg)
        out.model = TrendModel(
            cfg=cfg,
            scale=TimeScale(fitted["t0"], fitted["span"]),
            changepoints=np.asarray(fitted["changepoints"], dtype=float),
            y_mean=float(fitted["y_mean"]),
            beta=np.asarray(fitted["beta"], dtype=float),
        )
        out.start = int(data["start"])
        return out
