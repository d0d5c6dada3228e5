"""
Shared numeric kernels: differencing/integration, EMA, Nelder-Mead with restarts
and a ridge solver.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize, signal

from .errors import EmptyInput, NonFiniteObjective, SeriesTooShort, ShapeMismatch, SingularSystem

logger = logging.getLogger("Numerics")


@dataclass(frozen=True)
class DiffStep:
    lag: int
    head: np.ndarray  # first `lag` values before this step
    tail: np.ndarray  # last `lag` values before this step


@dataclass(frozen=True)
class DifferenceInfo:
    d: int
    D: int
    s: int
    steps: Tuple[DiffStep, ...] = ()

    @property
    def retained(self) -> int:
        return sum(step.lag for step in self.steps)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "D": self.D,
            "s": self.s,
            "steps": [
                {"lag": st.lag, "head": st.head.tolist(), "tail": st.tail.tolist()} for st in self.steps
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DifferenceInfo":
        steps = tuple(
            DiffStep(lag=int(st["lag"]), head=np.asarray(st["head"], float), tail=np.asarray(st["tail"], float))
            for st in data["steps"]
        )
        return cls(d=int(data["d"]), D=int(data["D"]), s=int(data["s"]), steps=steps)


@dataclass
class OptimizerResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def _lags(d: int, D: int, s: int) -> List[int]:
    # seasonal differences first, then regular ones
    return [s] * D + [1] * d


def difference(y: Sequence[float], d: int, D: int = 0, s: int = 1) -> Tuple[np.ndarray, DifferenceInfo]:
    """Apply ``D`` seasonal (lag ``s``) and ``d`` regular differences."""
    if not (0 <= d <= 2 and 0 <= D <= 2) or s < 1:
        raise ValueError(f"invalid differencing orders d={d}, D={D}, s={s}")
    x = np.asarray(y, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected a 1-D series, got shape {x.shape}")
    if len(x) <= d + D * s:
        raise SeriesTooShort(f"series of length {len(x)} cannot be differenced with d={d}, D={D}, s={s}")
    steps = []
    for lag in _lags(d, D, s):
        steps.append(DiffStep(lag=lag, head=x[:lag].copy(), tail=x[-lag:].copy()))
        x = x[lag:] - x[:-lag]
    return x, DifferenceInfo(d=d, D=D, s=s, steps=tuple(steps))


def difference_columns(X: np.ndarray, d: int, D: int = 0, s: int = 1) -> np.ndarray:
    """Column-wise differencing of a 2-D array (no inversion info kept)."""
    X = np.asarray(X, dtype=float)
    for lag in _lags(d, D, s):
        X = X[lag:] - X[:-lag]
    return X


def _undifference(z: np.ndarray, seed: np.ndarray, lag: int) -> np.ndarray:
    """Invert one lag-``lag`` difference given the ``lag`` values preceding ``z``."""
    full = np.empty(len(z) + lag)
    full[:lag] = seed
    for r in range(lag):
        full[r::lag] = np.cumsum(np.concatenate(([seed[r]], z[r::lag])))
    return full


def integrate(z: Sequence[float], info: DifferenceInfo) -> np.ndarray:
    """Exact inverse of :func:`difference`, rebuilding the series from its head values."""
    x = np.asarray(z, dtype=float)
    for step in reversed(info.steps):
        if len(step.head) != step.lag:
            raise ShapeMismatch(f"retained values of length {len(step.head)} do not match lag {step.lag}")
        x = _undifference(x, step.head, step.lag)
    return x


def integrate_forecast(z_future: Sequence[float], info: DifferenceInfo) -> np.ndarray:
    """Integrate values that continue the differenced series past its end."""
    x = np.asarray(z_future, dtype=float)
    for step in reversed(info.steps):
        if len(step.tail) != step.lag:
            raise ShapeMismatch(f"retained values of length {len(step.tail)} do not match lag {step.lag}")
        x = _undifference(x, step.tail, step.lag)[step.lag:]
    return x


def ema(values: Sequence[float], k: int) -> float:
    """
    Exponential moving average with beta = 2/(k+1), seeded with the first value.

    Returns the smoothed last value.
    """
    if k < 1:
        raise ValueError("EMA window must be >= 1")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyInput("EMA of an empty series")
    if v.size == 1:
        return float(v[0])
    beta = 2.0 / (k + 1.0)
    out, _ = signal.lfilter([beta], [1.0, beta - 1.0], v[1:], zi=[(1.0 - beta) * v[0]])
    return float(out[-1])


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    max_iter: int = 2000,
    tol: float = 1e-8,
    restarts: int = 3,
    seed: int = 0,
) -> OptimizerResult:
    """
    Minimize ``f`` with Nelder-Mead, restarting from a jittered best point.

    The returned point is the best ever evaluated; ``x0`` is returned unchanged
    when nothing improves on ``f(x0)``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = float(f(x0))
    if not np.isfinite(f0):
        raise NonFiniteObjective(f"objective is not finite at the starting point ({f0})")

    best_x, best_f = x0.copy(), f0
    history = [f0]

    def tracked(x):
        nonlocal best_x, best_f
        val = float(f(x))
        if not np.isfinite(val):
            val = np.inf
        if val < best_f:
            best_x, best_f = np.array(x, dtype=float), val
        history.append(best_f)
        return val

    rng = np.random.default_rng(seed)
    iterations = 0
    converged = False
    start = x0
    for attempt in range(restarts + 1):
        res = optimize.minimize(
            tracked,
            start,
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": tol, "fatol": tol},
        )
        iterations += int(res.nit)
        converged = converged or bool(res.success)
        logger.debug(f"Nelder-Mead run {attempt}: f={best_f:.6g} after {res.nit} iterations")
        start = best_x + rng.normal(scale=0.1, size=best_x.shape) * (1.0 + np.abs(best_x))

    return OptimizerResult(x=best_x, fun=best_f, iterations=iterations, converged=converged, history=history)


def ridge_solve(X: np.ndarray, y: Sequence[float], lam: float) -> np.ndarray:
    """Minimize ||y - X b||^2 + lam ||b||^2 through the normal equations."""
    if lam < 0:
        raise ValueError("ridge lambda must be >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"X {X.shape} and y {y.shape} do not align")
    A = X.T @ X + lam * np.eye(X.shape[1])
    b = X.T @ y
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(A, b, assume_a="sym")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            raise SingularSystem(f"normal equations are singular (lambda={lam}): {e}")
