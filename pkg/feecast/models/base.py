from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from ..dataset import Dataset
from ..errors import HorizonNonPositive

ENVELOPE_VERSION = 1


@dataclass
class ForecastSeries:
    """h-step predictions; ``start`` is the absolute row index of the first one."""

    model: str
    start: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self.values))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"step": np.arange(1, len(self) + 1), "row": self.index, "prediction": self.values})


def check_horizon(h: int) -> None:
    if h < 1:
        raise HorizonNonPositive(f"forecast horizon must be >= 1, got {h}")


class Forecaster(ABC):
    """Abstract interface every forecasting model implements."""

    name: str = ""

    @property
    def uses_realized_lag(self) -> bool:
        """Models evaluated one step ahead receive the realized test actuals."""
        return False

    @abstractmethod
    def fit(self, train: Dataset) -> "Forecaster":
        """Fit on a preprocessed training slice; returns self."""

    @abstractmethod
    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        """Predict the h rows that follow the training slice."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON-serializable envelope: {"model": name, "version": 1, ...}."""

    def envelope(self, **payload: Any) -> Dict[str, Any]:
        return {"model": self.name, "version": ENVELOPE_VERSION, **payload}
