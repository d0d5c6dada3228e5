import logging
from typing import TYPE_CHECKING, Any, Dict

from ..errors import ConfigError

if TYPE_CHECKING:
    from ..config import PipelineConfig
    from .base import Forecaster

logger = logging.getLogger("ModelFactory")

MODEL_NAMES = ("sarimax", "trend", "t2v", "gbm", "hybrid", "naive")


def get_forecaster(name: str, cfg: "PipelineConfig") -> "Forecaster":
    """Build an unfitted forecaster for ``name`` from the pipeline config."""
    try:
        if name == "sarimax":
            from .sarimax import SarimaxForecaster

            return SarimaxForecaster(cfg.sarimax)
        elif name == "trend":
            from .trend import TrendForecaster

            return TrendForecaster(cfg.trend)
        elif name == "t2v":
            from .t2v import T2VForecaster

            return T2VForecaster(cfg.t2v, standardize_columns=cfg.prep.standardize_columns)
        elif name == "gbm":
            from .gbm import GbmForecaster

            return GbmForecaster(cfg.gbm, cfg.features)
        elif name == "hybrid":
            from .hybrid import HybridForecaster

            return HybridForecaster(cfg.hybrid, cfg.sarimax, cfg.gbm)
        elif name == "naive":
            from .naive import NaiveForecaster

            return NaiveForecaster()
    except ImportError as e:
        logger.error(f"Failed to import model {name}: {e}")
        raise
    raise ConfigError(f"unknown model '{name}' (choose from {', '.join(MODEL_NAMES)})")


def load_forecaster(data: Dict[str, Any]) -> "Forecaster":
    """Rebuild a fitted forecaster from its JSON envelope."""
    name = data.get("model")
    if name == "sarimax":
        from .sarimax import SarimaxForecaster

        return SarimaxForecaster.from_dict(data)
    elif name == "trend":
        from .trend import TrendForecaster

        return TrendForecaster.from_dict(data)
    elif name == "t2v":
        from .t2v import T2VForecaster

        return T2VForecaster.from_dict(data)
    elif name == "gbm":
        from .gbm import GbmForecaster

        return GbmForecaster.from_dict(data)
    elif name == "hybrid":
        from .hybrid import HybridForecaster

        return HybridForecaster.from_dict(data)
    elif name == "naive":
        from .naive import NaiveForecaster

        return NaiveForecaster.from_dict(data)
    raise ConfigError(f"unknown model envelope '{name}'")
