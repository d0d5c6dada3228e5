"""
Two-stage hybrid: a SARIMAX base forecast, a GBM trained on features enhanced
with the SARIMAX predictions and residuals, and a dynamic blend of the two.

The blend weight is alpha = 1 / (1 + exp(EMA(e_s) - EMA(e_g))), where e_s and
e_g are the absolute in-sample errors of each stage over the last
``ema_window`` training rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from ..config import GbmConfig, HybridConfig, SarimaxConfig
from ..dataset import Dataset
from ..errors import LengthMismatch
from ..features import carry_rows, lagged, rolling_stats
from ..numerics import ema
from ..prep import fill_frame
from ..schemas import RAW_INPUT_COLUMNS
from .base import ForecastSeries, Forecaster, check_horizon
from .gbm import GbmModel, fit_gbm
from .sarimax import SarimaxModel, fit_sarimax

logger = logging.getLogger("Hybrid")

# keeps alpha strictly inside (0, 1) once exp() saturates
ALPHA_EPS = 1e-15


def _shift(series: np.ndarray) -> np.ndarray:
    return np.concatenate(([np.nan], series[:-1])) if len(series) else series


def enhanced_columns(w: int, lags: Sequence[int]) -> List[str]:
    return [
        *RAW_INPUT_COLUMNS,
        "sarimax_pred",
        "sarimax_resid_prev",
        f"rolling_mean_{w}",
        f"rolling_std_{w}",
        f"resid_rolling_mean_{w}",
        f"resid_rolling_std_{w}",
        *(f"lag_{k}" for k in lags),
        *(f"resid_lag_{k}" for k in lags),
    ]


def build_enhanced(
    X: np.ndarray,
    y_s: Sequence[float],
    r_s: Sequence[float],
    w: int,
    lags: Sequence[int],
) -> np.ndarray:
    """
    Stage-two design matrix.

    Columns are the raw inputs, the SARIMAX prediction, the previous SARIMAX
    residual, rolling mean/std of the previous ``w`` targets and residuals, then
    target lags and residual lags. The target is recovered as ``y_s + r_s``.
    Row i uses no target or residual later than i - 1. Leading gaps are filled
    forward then backward.
    """
    X = np.asarray(X, dtype=float)
    y_s = np.asarray(y_s, dtype=float)
    r_s = np.asarray(r_s, dtype=float)
    if not (len(X) == len(y_s) == len(r_s)):
        raise LengthMismatch(f"X has {len(X)} rows, y_s {len(y_s)}, r_s {len(r_s)}")

    y = y_s + r_s
    y_mean, y_std = rolling_stats(_shift(y), w)
    r_mean, r_std = rolling_stats(_shift(r_s), w)
    blocks = [
        X,
        y_s[:, None],
        _shift(r_s)[:, None],
        np.column_stack([y_mean, y_std, r_mean, r_std]),
        lagged(y, lags),
        lagged(r_s, lags),
    ]
    E = np.hstack(blocks)
    frame = pd.DataFrame(E[:, X.shape[1] :])
    # residual-only columns can be entirely missing on very short series
    empty = frame.columns[frame.isna().all()]
    frame[empty] = 0.0
    E[:, X.shape[1] :] = fill_frame(frame).to_numpy()
    return E


def dynamic_weight(ema_es: float, ema_eg: float) -> float:
    """SARIMAX share of the blend: 1 / (1 + exp(ema_es - ema_eg)), kept in (0, 1)."""
    d = float(ema_es) - float(ema_eg)
    s = max(float(expit(-abs(d))), ALPHA_EPS)
    return s if d >= 0 else 1.0 - s


def blend(y_s: np.ndarray, y_g: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * np.asarray(y_s, dtype=float) + (1.0 - alpha) * np.asarray(y_g, dtype=float)


@dataclass
class HybridState:
    sarimax: SarimaxModel
    gbm: GbmModel
    ema_es: float
    ema_eg: float
    e_tail: np.ndarray  # last enhanced rows, carried into the horizon
    last_resid: float

    @property
    def alpha(self) -> float:
        return dynamic_weight(self.ema_es, self.ema_eg)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sarimax": self.sarimax.to_dict(),
            "gbm": self.gbm.to_dict(),
            "ema_es": self.ema_es,
            "ema_eg": self.ema_eg,
            "alpha": self.alpha,
            "e_tail": self.e_tail.tolist(),
            "last_resid": self.last_resid,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HybridState":
        return cls(
            sarimax=SarimaxModel.from_dict(data["sarimax"]),
            gbm=GbmModel.from_dict(data["gbm"]),
            ema_es=float(data["ema_es"]),
            ema_eg=float(data["ema_eg"]),
            e_tail=np.asarray(data["e_tail"], dtype=float),
            last_resid=float(data["last_resid"]),
        )


def _tail_ema(errors: np.ndarray, k: int) -> float:
    tail = errors[np.isfinite(errors)][-k:]
    return ema(tail, k) if len(tail) else 0.0


def fit_hybrid(
    y: np.ndarray,
    X: np.ndarray,
    cfg: HybridConfig,
    sarimax_cfg: SarimaxConfig,
    gbm_cfg: GbmConfig,
    progress: bool = False,
) -> HybridState:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)

    # stage 1
    sarimax = fit_sarimax(y, X if sarimax_cfg.use_exog else None, sarimax_cfg)
    y_s, r_s = sarimax.in_sample_predictions()
    y_s = np.where(np.isfinite(y_s), y_s, y)
    r_s = np.where(np.isfinite(r_s), r_s, 0.0)

    # stage 2
    E = build_enhanced(X, y_s, r_s, cfg.rolling_window, cfg.lags)
    gbm = fit_gbm(E, y, gbm_cfg, progress=progress)
    y_g = gbm.predict(E)

    # stage 3
    k0 = sarimax.order.integration_rows
    e_s = np.abs(y - y_s)
    e_s[:k0] = np.nan
    state = HybridState(
        sarimax=sarimax,
        gbm=gbm,
        ema_es=_tail_ema(e_s, cfg.ema_window),
        ema_eg=_tail_ema(np.abs(y - y_g), cfg.ema_window),
        e_tail=E[-cfg.season :].copy(),
        last_resid=float(r_s[-1]),
    )
    logger.info(
        f"Hybrid EMA(e_s)={state.ema_es:.4g} EMA(e_g)={state.ema_eg:.4g} alpha={state.alpha:.4f}"
    )
    return state


class HybridForecaster(Forecaster):
    name = "hybrid"

    def __init__(self, cfg: HybridConfig, sarimax_cfg: SarimaxConfig, gbm_cfg: GbmConfig, progress: bool = False):
        self.cfg = cfg
        self.sarimax_cfg = sarimax_cfg
        self.gbm_cfg = gbm_cfg
        self.progress = progress
        self.state: Optional[HybridState] = None
        self.start = 0

    @property
    def alpha(self) -> float:
        return self.state.alpha

    def fit(self, train: Dataset) -> "HybridForecaster":
        X = train.frame[RAW_INPUT_COLUMNS].to_numpy(dtype=float)
        self.state = fit_hybrid(train.target, X, self.cfg, self.sarimax_cfg, self.gbm_cfg, self.progress)
        self.start = train.row_offset + len(train)
        return self

    def future_features(self, h: int, y_s: np.ndarray) -> np.ndarray:
        """Enhanced rows for the horizon: carried tail, known SARIMAX path, future residuals 0."""
        n_raw = len(RAW_INPUT_COLUMNS)
        E = carry_rows(self.state.e_tail, h, "seasonal", self.cfg.season)
        E[:, :n_raw] = carry_rows(self.state.e_tail[:, :n_raw], h, self.gbm_cfg.exog_policy, self.cfg.season)
        E[:, n_raw] = y_s
        E[:, n_raw + 1] = 0.0
        E[0, n_raw + 1] = self.state.last_resid
        return E

    def components(self, h: int) -> Tuple[np.ndarray, np.ndarray]:
        """(SARIMAX path, GBM path) for the next h rows."""
        check_horizon(h)
        model = self.state.sarimax
        X_future = None
        if model.n_exog:
            X_future = carry_rows(model.x_tail, h, self.sarimax_cfg.exog_policy, model.order.s)
        y_s = model.forecast(h, X_future)
        y_g = self.state.gbm.predict(self.future_features(h, y_s))
        return y_s, y_g

    def forecast(
        self, h: int, realized: Optional[np.ndarray] = None, alpha: Optional[float] = None
    ) -> ForecastSeries:
        y_s, y_g = self.components(h)
        weight = self.alpha if alpha is None else alpha
        return ForecastSeries(self.name, self.start, blend(y_s, y_g, weight))

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(
            config=self.cfg.model_dump(),
            sarimax_config=self.sarimax_cfg.model_dump(),
            gbm_config=self.gbm_cfg.model_dump(),
            start=self.start,
            fitted=self.state.to_dict(),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HybridForecaster":
        out = cls(
            HybridConfig(**data["config"]),
            SarimaxConfig(**data["sarimax_config"]),
            GbmConfig(**data["gbm_config"]),
        )
        out.state = HybridState.from_dict(data["fitted"])
        out.start = int(data["start"])
        return out
