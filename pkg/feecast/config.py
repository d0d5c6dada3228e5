# pipeline configuration
from __future__ import annotations

import logging
import math
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .schemas import PriceSource, RpcEndpoint

logger = logging.getLogger("PipelineConfig")

SEASON = 144  # blocks per day
DEFAULT_RPC_URL = "http://127.0.0.1:8332"
DEFAULT_BIN_EDGES = [0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 50.0, 100.0, math.inf]

ExogPolicy = Literal["seasonal", "freeze"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IngestConfig(_Section):
    rpc: RpcEndpoint = Field(default_factory=lambda: RpcEndpoint(url=DEFAULT_RPC_URL))
    price: PriceSource = Field(default_factory=PriceSource)
    poll_interval: float = Field(10.0, gt=0, description="Seconds between tip checks")
    freshness_window: float = Field(120.0, gt=0, description="Max age of mempool/price inputs")
    backoff_base: float = Field(1.0, gt=0)
    backoff_cap: float = Field(60.0, gt=0)


class ClipSpec(_Section):
    lower_pct: float = Field(1.0, ge=0, le=100)
    upper_pct: float = Field(99.0, ge=0, le=100)
    overrides: Dict[str, Tuple[float, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _ordered(self) -> "ClipSpec":
        pairs = [(self.lower_pct, self.upper_pct), *self.overrides.values()]
        for lo, hi in pairs:
            if not (0 <= lo < hi <= 100):
                raise ValueError(f"clip bounds must satisfy 0 <= lower < upper <= 100, got ({lo}, {hi})")
        return self

    def bounds_for(self, column: str) -> Tuple[float, float]:
        return self.overrides.get(column, (self.lower_pct, self.upper_pct))


class PrepConfig(_Section):
    clip: ClipSpec = Field(default_factory=ClipSpec)
    clip_columns: Optional[List[str]] = Field(None, description="None = every feature column")
    standardize_columns: Optional[List[str]] = Field(
        None, description="Time2Vec inputs to rescale; None = every feature column"
    )


class FeatureSpec(_Section):
    rolling_window: Optional[int] = Field(36, ge=2, description="None disables rolling stats")
    lags: List[int] = Field(default_factory=lambda: [1, 2, 3, 144])
    t_low: float = 3.0
    t_high: float = 12.0
    bin_edges: List[float] = Field(default_factory=lambda: list(DEFAULT_BIN_EDGES))

    @model_validator(mode="after")
    def _check(self) -> "FeatureSpec":
        if any(lag < 1 for lag in self.lags):
            raise ValueError("lags must be >= 1")
        if not self.t_low < self.t_high:
            raise ValueError("t_low must be < t_high")
        if any(b <= a for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise ValueError("bin_edges must be strictly ascending")
        return self


class SarimaxConfig(_Section):
    p: int = Field(2, ge=0)
    d: int = Field(1, ge=0, le=2)
    q: int = Field(2, ge=0)
    P: int = Field(1, ge=0)
    D: int = Field(1, ge=0, le=2)
    Q: int = Field(1, ge=0)
    s: int = Field(SEASON, ge=1)
    with_intercept: Optional[bool] = Field(None, description="None = only when d + D == 0")
    use_exog: bool = True
    exog_policy: ExogPolicy = "seasonal"
    max_iter: int = Field(2000, gt=0)
    tol: float = Field(1e-8, gt=0)
    restarts: int = Field(3, ge=0)
    seed: int = 0


class TrendConfig(_Section):
    n_changepoints: int = Field(25, ge=0)
    changepoint_range: float = Field(0.8, gt=0, le=1)
    fourier_order: int = Field(10, ge=0)
    period: float = Field(float(SEASON), gt=0)
    ridge_lambda: float = Field(1.0, ge=0)


class T2VConfig(_Section):
    embedding_dim: int = Field(64, ge=2)
    hidden: List[int] = Field(default_factory=lambda: [128, 64, 32])
    learning_rate: float = Field(1e-3, gt=0)
    frequency_lr_scale: float = Field(0.1, gt=0, description="Step multiplier for omega/phase")
    batch_size: int = Field(64, gt=0)
    max_epochs: int = Field(200, gt=0)
    patience: int = Field(20, gt=0)
    validation_fraction: float = Field(0.1, ge=0, lt=1)
    horizon: int = Field(SEASON, gt=0)
    season: int = Field(SEASON, gt=0)
    exog_policy: ExogPolicy = "seasonal"
    seed: int = 0


class GbmConfig(_Section):
    """
    Boosting settings. Split search is exhaustive over the binned features with no row
    or column subsampling, so a fit is a pure function of its data and takes no seed.
    A ``seed`` key under [gbm] is reported as unknown and ignored.
    """

    n_trees: int = Field(1000, gt=0)
    max_depth: int = Field(8, gt=0)
    learning_rate: float = Field(0.01, gt=0, le=1)
    n_bins: int = Field(64, ge=2, le=256)
    min_samples_leaf: int = Field(20, gt=0)
    patience: int = Field(50, gt=0)
    validation_fraction: float = Field(0.1, ge=0, lt=1)
    exog_policy: ExogPolicy = "seasonal"


class HybridConfig(_Section):
    ema_window: int = Field(SEASON, ge=1)
    rolling_window: int = Field(36, ge=2)
    lags: List[int] = Field(default_factory=lambda: [1, 2, 3, 144])
    season: int = Field(SEASON, gt=0)


class CvConfig(_Section):
    initial: int = Field(9665, gt=0)
    step: int = Field(SEASON, gt=0)
    horizon: int = Field(SEASON, gt=0)
    folds: int = Field(5, gt=0)
    test_len: int = Field(SEASON, gt=0)
    workers: int = Field(1, gt=0)


class OutputConfig(_Section):
    directory: str = "reports"
    include_timings: bool = False


class PipelineConfig(_Section):
    seed: int = 0
    ingest: IngestConfig = Field(default_factory=IngestConfig)
    prep: PrepConfig = Field(default_factory=PrepConfig)
    features: FeatureSpec = Field(default_factory=FeatureSpec)
    sarimax: SarimaxConfig = Field(default_factory=SarimaxConfig)
    trend: TrendConfig = Field(default_factory=TrendConfig)
    t2v: T2VConfig = Field(default_factory=T2VConfig)
    gbm: GbmConfig = Field(default_factory=GbmConfig)
    hybrid: HybridConfig = Field(default_factory=HybridConfig)
    cv: CvConfig = Field(default_factory=CvConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def _strip_unknown(data: Dict[str, Any], model: Type[BaseModel], prefix: str = "") -> List[str]:
    """Remove keys the model does not declare; return their dotted names."""
    unknown: List[str] = []
    for key in list(data):
        field = model.model_fields.get(key)
        if field is None:
            unknown.append(f"{prefix}{key}")
            del data[key]
            continue
        sub = field.annotation
        if isinstance(data[key], dict) and isinstance(sub, type) and issubclass(sub, BaseModel):
            unknown.extend(_strip_unknown(data[key], sub, prefix=f"{prefix}{key}."))
    return unknown


ENV_OVERRIDES = {
    "RPC_URL": ("rpc", "url"),
    "RPC_USER": ("rpc", "user"),
    "RPC_PASS": ("rpc", "password"),
    "PRICE_URL": ("price", "url"),
}


def load_config(path: Optional[str | Path] = None) -> Tuple[PipelineConfig, List[str]]:
    """
    Load a pipeline config from TOML, overlaying RPC_URL/RPC_USER/RPC_PASS/PRICE_URL
    from the environment (and a .env file if present).

    Returns:
        (config, warnings) where warnings lists ignored unknown keys.
    """
    load_dotenv()
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        try:
            with open(config_path, "rb") as f:
                data = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"File not found: {config_path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML in {config_path}: {e}")

    warnings = [f"unknown config key '{k}' ignored" for k in _strip_unknown(data, PipelineConfig)]
    for w in warnings:
        logger.warning(w)

    ingest = data.setdefault("ingest", {})
    for env_key, (section, field) in ENV_OVERRIDES.items():
        value = os.getenv(env_key)
        if value:
            ingest.setdefault(section, {})[field] = value
    if "rpc" in ingest:
        ingest["rpc"].setdefault("url", DEFAULT_RPC_URL)

    try:
        return PipelineConfig.model_validate(data), warnings
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{loc}: {first['msg']}")
