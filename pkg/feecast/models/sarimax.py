"""
Seasonal ARIMA with exogenous regressors, estimated by conditional sum of squares.

The differenced target z follows

    AR(B) Sar(B^s) z_t = mu + x_t' beta + MA(B) Sma(B^s) e_t

with pre-sample values taken as zero. Residuals inside the burn-in window
p + q + s(P + Q) are computed but left out of the objective. For a given set of
ARMA coefficients the residuals are linear in (mu, beta), so those are solved
by least squares and only the ARMA coefficients go through Nelder-Mead, each
mapped through tanh to keep it inside (-1, 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg, signal

from ..config import SarimaxConfig
from ..dataset import Dataset
from ..errors import OptimizerFailure, SeriesTooShort, ShapeMismatch
from ..features import carry_rows
from ..numerics import (
    DifferenceInfo,
    OptimizerResult,
    difference,
    difference_columns,
    integrate_forecast,
    nelder_mead,
)
from ..schemas import RAW_INPUT_COLUMNS
from .base import ForecastSeries, Forecaster, check_horizon

logger = logging.getLogger("Sarimax")


@dataclass(frozen=True)
class SarimaxOrder:
    p: int = 2
    d: int = 1
    q: int = 2
    P: int = 1
    D: int = 1
    Q: int = 1
    s: int = 144

    @classmethod
    def from_config(cls, cfg: SarimaxConfig) -> "SarimaxOrder":
        return cls(cfg.p, cfg.d, cfg.q, cfg.P, cfg.D, cfg.Q, cfg.s)

    @property
    def burn_in(self) -> int:
        return self.p + self.q + self.s * (self.P + self.Q)

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def integration_rows(self) -> int:
        return self.d + self.D * self.s

    def as_tuple(self) -> Tuple[int, ...]:
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.s)


def polynomials(order: SarimaxOrder, coefs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Expanded AR and MA lag polynomials (leading 1) from (phi, theta, Phi, Theta)."""
    p, q, P, Q, s = order.p, order.q, order.P, order.Q, order.s
    phi, theta = coefs[:p], coefs[p : p + q]
    sphi, stheta = coefs[p + q : p + q + P], coefs[p + q + P : p + q + P + Q]

    seasonal_ar = np.zeros(P * s + 1)
    seasonal_ar[0] = 1.0
    seasonal_ar[s::s] = -sphi
    seasonal_ma = np.zeros(Q * s + 1)
    seasonal_ma[0] = 1.0
    seasonal_ma[s::s] = stheta

    ar = np.convolve(np.r_[1.0, -phi], seasonal_ar)
    ma = np.convolve(np.r_[1.0, theta], seasonal_ma)
    return ar, ma


def css_residuals(
    coefs: np.ndarray,
    z: np.ndarray,
    order: SarimaxOrder,
    Xz: Optional[np.ndarray] = None,
    mu: float = 0.0,
    beta: Optional[np.ndarray] = None,
) -> np.ndarray:
    ar, ma = polynomials(order, np.asarray(coefs, dtype=float))
    u = signal.lfilter(ar, [1.0], z) - mu
    if Xz is not None and beta is not None and len(beta):
        u = u - Xz @ beta
    return signal.lfilter([1.0], ma, u)


def css_objective(
    params: np.ndarray,
    z: np.ndarray,
    order: SarimaxOrder,
    Xz: Optional[np.ndarray] = None,
    intercept: bool = False,
) -> float:
    """
    Sum of squared residuals after burn-in.

    ``params`` is laid out as [phi, theta, Phi, Theta, (mu), beta].
    """
    params = np.asarray(params, dtype=float)
    k = order.n_arma
    mu = params[k] if intercept else 0.0
    beta = params[k + int(intercept) :]
    if Xz is not None and Xz.shape[1] != len(beta):
        raise ShapeMismatch(f"{Xz.shape[1]} exogenous columns but {len(beta)} coefficients")
    e = css_residuals(params[:k], z, order, Xz, mu, beta)
    return float(np.sum(e[order.burn_in :] ** 2))


def _profile(
    coefs: np.ndarray, z: np.ndarray, order: SarimaxOrder, Xz: np.ndarray, intercept: bool
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Objective, regression coefficients and residuals with (mu, beta) solved exactly."""
    ar, ma = polynomials(order, coefs)
    a = signal.lfilter([1.0], ma, signal.lfilter(ar, [1.0], z))
    if not np.all(np.isfinite(a)):
        return np.inf, np.empty(0), a

    regressors = []
    if intercept:
        regressors.append(signal.lfilter([1.0], ma, np.ones_like(z))[:, None])
    if Xz.shape[1]:
        regressors.append(signal.lfilter([1.0], ma, Xz, axis=0))
    burn = order.burn_in
    if not regressors:
        return float(np.sum(a[burn:] ** 2)), np.empty(0), a

    R = np.hstack(regressors)
    if not np.all(np.isfinite(R)):
        return np.inf, np.empty(0), a
    reg, *_ = linalg.lstsq(R[burn:], a[burn:])
    e = a - R @ reg
    return float(np.sum(e[burn:] ** 2)), reg, e


@dataclass
class SarimaxModel:
    order: SarimaxOrder
    coefs: np.ndarray
    intercept: bool
    mu: float
    beta: np.ndarray
    x_scale: np.ndarray
    sigma2: float
    objective: float
    y: np.ndarray
    residuals: np.ndarray  # on the differenced scale, aligned with z
    x_tail: np.ndarray  # raw exogenous rows at the end of training
    iterations: int = 0
    converged: bool = True
    z: np.ndarray = field(init=False, repr=False)
    info: DifferenceInfo = field(init=False, repr=False)

    def __post_init__(self):
        o = self.order
        self.z, self.info = difference(self.y, o.d, o.D, o.s)

    @property
    def phi(self) -> np.ndarray:
        return self.coefs[: self.order.p]

    @property
    def theta(self) -> np.ndarray:
        return self.coefs[self.order.p : self.order.p + self.order.q]

    @property
    def seasonal_phi(self) -> np.ndarray:
        o = self.order
        return self.coefs[o.p + o.q : o.p + o.q + o.P]

    @property
    def seasonal_theta(self) -> np.ndarray:
        o = self.order
        return self.coefs[o.p + o.q + o.P :]

    @property
    def n_exog(self) -> int:
        return len(self.beta)

    def in_sample_predictions(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        One-step-ahead predictions aligned to y and residuals y - prediction.

        The first d + D*s rows have no prediction and are NaN.
        """
        k0 = self.order.integration_rows
        pred = np.full(len(self.y), np.nan)
        pred[k0:] = self.y[k0:] - self.residuals
        resid = self.y - pred
        logger.debug(f"In-sample residual mean {np.nanmean(resid):.6g}")
        return pred, resid

    def forecast(self, h: int, X_future: Optional[np.ndarray] = None) -> np.ndarray:
        """h-step recursion on the differenced scale with future shocks at zero, then integrate."""
        check_horizon(h)
        ar, ma = polynomials(self.order, self.coefs)
        L, M = len(ar) - 1, len(ma) - 1

        exog = np.zeros(h)
        if self.n_exog:
            if X_future is None or len(X_future) != h:
                raise ShapeMismatch(f"expected {h} future exogenous rows")
            X_future = np.asarray(X_future, dtype=float)
            k0 = self.order.integration_rows
            history = self.x_tail[len(self.x_tail) - k0 :] if k0 else self.x_tail[:0]
            Xf = difference_columns(np.vstack([history, X_future]), self.order.d, self.order.D, self.order.s)
            exog = (Xf / self.x_scale) @ self.beta

        zf = np.concatenate([np.zeros(max(0, L - len(self.z))), self.z[-L:] if L else [], np.zeros(h)])
        ef = np.concatenate([np.zeros(max(0, M - len(self.residuals))), self.residuals[-M:] if M else [], np.zeros(h)])
        for j in range(h):
            t, te = L + j, M + j
            ar_part = ar[1:] @ zf[t - L : t][::-1] if L else 0.0
            ma_part = ma[1:] @ ef[te - M : te][::-1] if M else 0.0
            zf[t] = self.mu + exog[j] - ar_part + ma_part
        return integrate_forecast(zf[L:], self.info)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order": list(self.order.as_tuple()),
            "coefs": self.coefs.tolist(),
            "intercept": self.intercept,
            "mu": self.mu,
            "beta": self.beta.tolist(),
            "x_scale": self.x_scale.tolist(),
            "sigma2": self.sigma2,
            "objective": self.objective,
            "y": self.y.tolist(),
            "residuals": self.residuals.tolist(),
            "x_tail": self.x_tail.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SarimaxModel":
        n_exog = len(data["beta"])
        x_tail = np.asarray(data["x_tail"], dtype=float)
        x_tail = x_tail.reshape(-1, n_exog) if n_exog else np.empty((0, 0))
        return cls(
            order=SarimaxOrder(*data["order"]),
            coefs=np.asarray(data["coefs"], dtype=float),
            intercept=bool(data["intercept"]),
            mu=float(data["mu"]),
            beta=np.asarray(data["beta"], dtype=float),
            x_scale=np.asarray(data["x_scale"], dtype=float),
            sigma2=float(data["sigma2"]),
            objective=float(data["objective"]),
            y=np.asarray(data["y"], dtype=float),
            residuals=np.asarray(data["residuals"], dtype=float),
            x_tail=x_tail,
            iterations=int(data["iterations"]),
            converged=bool(data["converged"]),
        )


def fit_sarimax(y: np.ndarray, X: Optional[np.ndarray], cfg: SarimaxConfig) -> SarimaxModel:
    """Estimate SARIMAX by conditional sum of squares."""
    order = SarimaxOrder.from_config(cfg)
    y = np.asarray(y, dtype=float)
    z, _ = difference(y, order.d, order.D, order.s)
    if len(z) <= order.burn_in + 10:
        raise SeriesTooShort(
            f"{len(y)} rows leave {len(z)} differenced values; need more than {order.burn_in + 10}"
        )

    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) != len(y):
            raise ShapeMismatch(f"exogenous matrix {X.shape} does not match {len(y)} targets")
        Xz = difference_columns(X, order.d, order.D, order.s)
        x_scale = Xz.std(axis=0)
        x_scale[x_scale == 0] = 1.0
        Xz = Xz / x_scale
    else:
        X = np.empty((len(y), 0))
        Xz = np.empty((len(z), 0))
        x_scale = np.empty(0)

    intercept = cfg.with_intercept if cfg.with_intercept is not None else order.d + order.D == 0

    def objective(raw: np.ndarray) -> float:
        return _profile(np.tanh(raw), z, order, Xz, intercept)[0]

    if order.n_arma:
        result = nelder_mead(objective, np.zeros(order.n_arma), cfg.max_iter, cfg.tol, cfg.restarts, cfg.seed)
    else:
        result = OptimizerResult(x=np.empty(0), fun=objective(np.empty(0)), iterations=0, converged=True)
    if not np.isfinite(result.fun):
        raise OptimizerFailure("CSS objective did not reach a finite value")

    coefs = np.tanh(result.x)
    fun, reg, e = _profile(coefs, z, order, Xz, intercept)
    mu = float(reg[0]) if intercept else 0.0
    beta = np.asarray(reg[int(intercept) :], dtype=float)
    sigma2 = fun / (len(z) - order.burn_in)
    tail_rows = max(order.s, order.integration_rows)
    logger.info(f"SARIMAX{order.as_tuple()} CSS={fun:.6g} sigma2={sigma2:.6g} after {result.iterations} iterations")

    return SarimaxModel(
        order=order,
        coefs=coefs,
        intercept=intercept,
        mu=mu,
        beta=beta,
        x_scale=x_scale,
        sigma2=sigma2,
        objective=fun,
        y=y,
        residuals=e,
        x_tail=X[-tail_rows:].copy(),
        iterations=result.iterations,
        converged=result.converged,
    )


class SarimaxForecaster(Forecaster):
    name = "sarimax"

    def __init__(self, cfg: SarimaxConfig):
        self.cfg = cfg
        self.model: Optional[SarimaxModel] = None
        self.start = 0

    def fit(self, train: Dataset) -> "SarimaxForecaster":
        X = train.frame[RAW_INPUT_COLUMNS].to_numpy(dtype=float) if self.cfg.use_exog else None
        self.model = fit_sarimax(train.target, X, self.cfg)
        self.start = train.row_offset + len(train)
        return self

    def future_exog(self, h: int) -> Optional[np.ndarray]:
        if not self.model.n_exog:
            return None
        return carry_rows(self.model.x_tail, h, self.cfg.exog_policy, self.model.order.s)

    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        values = self.model.forecast(h, self.future_exog(h))
        return ForecastSeries(self.name, self.start, values)

    def in_sample(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.model.in_sample_predictions()

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(config=self.cfg.model_dump(), start=self.start, fitted=self.model.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SarimaxForecaster":
        out = cls(SarimaxConfig(**data["config"]))
        out.model = SarimaxModel.from_dict(data["fitted"])
        out.start = int(data["start"])
        return out
