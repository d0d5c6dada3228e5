from typing import Any, Dict, Optional

import numpy as np

from ..dataset import Dataset
from ..errors import LengthMismatch
from .base import ForecastSeries, Forecaster, check_horizon


class NaiveForecaster(Forecaster):
    """
    Lag-1 persistence, evaluated one step ahead.

    The prediction for row t is the realized value at t - 1, so the first step
    uses the last training target and later steps need the realized actuals.
    """

    name = "naive"

    def __init__(self):
        self.last_y = np.nan
        self.start = 0

    @property
    def uses_realized_lag(self) -> bool:
        return True

    def fit(self, train: Dataset) -> "NaiveForecaster":
        self.last_y = float(train.target[-1])
        self.start = train.row_offset + len(train)
        return self

    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        check_horizon(h)
        if realized is None:
            values = np.full(h, self.last_y)
        else:
            realized = np.asarray(realized, dtype=float)
            if len(realized) < h - 1:
                raise LengthMismatch(f"need {h - 1} realized values, got {len(realized)}")
            values = np.concatenate(([self.last_y], realized[: h - 1]))
        return ForecastSeries(self.name, self.start, values)

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(start=self.start, fitted={"last_y": self.last_y})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NaiveForecaster":
        out = cls()
        out.last_y = float(data["fitted"]["last_y"])
        out.start = int(data["start"])
        return out
