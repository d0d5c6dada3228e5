"""Point-forecast error metrics."""

from typing import Sequence, Tuple

import numpy as np

from ..errors import ConstantActuals, EmptyInput, LengthMismatch


def _pair(y: Sequence[float], y_hat: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if len(y) != len(y_hat):
        raise LengthMismatch(f"{len(y)} actuals vs {len(y_hat)} predictions")
    if len(y) == 0:
        raise EmptyInput("metrics need at least one value")
    return y, y_hat


def mae(y: Sequence[float], y_hat: Sequence[float]) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y - y_hat)))


def rmse(y: Sequence[float], y_hat: Sequence[float]) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def naive_path(y: Sequence[float], anchor: float) -> np.ndarray:
    """Lag-1 benchmark: anchor, y_1, ..., y_{n-1}."""
    y = np.asarray(y, dtype=float)
    return np.concatenate(([float(anchor)], y[:-1]))


def theils_u(y: Sequence[float], y_hat: Sequence[float], anchor: float) -> float:
    """
    Model RMSE over the RMSE of the lag-1 naive forecast.

    ``anchor`` is the last actual before the evaluation window. 0 is perfect,
    1 matches the naive benchmark.
    """
    y, y_hat = _pair(y, y_hat)
    denom = np.sqrt(np.mean((y - naive_path(y, anchor)) ** 2))
    if denom == 0:
        raise ConstantActuals("actuals never change; the naive benchmark error is zero")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)) / denom)
