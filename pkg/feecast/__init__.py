"""
feecast - Bitcoin block fee-rate forecasting.

Ingests per-block records from a Bitcoin Core node, engineers mempool and fee
features, and forecasts the median fee rate of upcoming blocks with SARIMAX,
trend, Time2Vec, gradient-boosting and hybrid models.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .dataset import Dataset, load_dataset, save_dataset, validate
from .models import MODEL_NAMES, get_forecaster, load_forecaster

__all__ = [
    "MODEL_NAMES",
    "Dataset",
    "PipelineConfig",
    "get_forecaster",
    "load_config",
    "load_dataset",
    "load_forecaster",
    "save_dataset",
    "validate",
]
