"""
Time2Vec embedding feeding a ReLU feed-forward regressor, trained with Adam.

One network covers every horizon: each sample is (tau(t), x, h / season) where x is
the exogenous row a forecast issued h steps before t would have had (seasonal
carry or freeze, matching the SARIMAX exogenous policy).
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..config import T2VConfig
from ..dataset import Dataset
from ..errors import Diverged, ShapeMismatch, TooFewRows
from ..prep import ColumnStats, apply_standardize, fit_standardize
from ..schemas import FEATURE_COLUMNS
from .base import ForecastSeries, Forecaster, check_horizon

logger = logging.getLogger("Time2Vec")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _as_matrix(X, n: int) -> np.ndarray:
    if X is None:
        return np.empty((n, 0))
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.empty((n, 0))
    return X.reshape(n, -1)


@dataclass
class T2VParams:
    omega: np.ndarray
    phase: np.ndarray
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @property
    def k(self) -> int:
        return len(self.omega)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    def arrays(self) -> List[np.ndarray]:
        return [self.omega, self.phase, *self.weights, *self.biases]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "omega": self.omega.tolist(),
            "phase": self.phase.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "T2VParams":
        return cls(
            omega=np.asarray(data["omega"], dtype=float),
            phase=np.asarray(data["phase"], dtype=float),
            weights=[np.asarray(w, dtype=float) for w in data["weights"]],
            biases=[np.asarray(b, dtype=float) for b in data["biases"]],
        )


def init_params(
    n_features: int,
    cfg: T2VConfig,
    span: float,
    rng: np.random.Generator,
) -> T2VParams:
    """
    Xavier-uniform dense layers, zero biases. Periodic frequencies are log-spaced
    over periods of 1440 down to 14.4 blocks, expressed in scaled-time units.
    """
    k = cfg.embedding_dim
    periods = np.geomspace(10.0 * cfg.season, cfg.season / 10.0, k - 1)
    omega = np.r_[1.0, 2.0 * np.pi / periods * span]
    phase = np.r_[0.0, rng.uniform(0.0, 2.0 * np.pi, k - 1)]

    sizes = [k + n_features + 1, *cfg.hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return T2VParams(omega, phase, weights, biases)


def embed(tau, params: T2VParams) -> np.ndarray:
    """Element 0 is omega_0 * tau + phi_0; the rest are sin(omega_i * tau + phi_i)."""
    tau = np.asarray(tau, dtype=float)
    a = tau[..., None] * params.omega + params.phase
    out = a.copy()
    out[..., 1:] = np.sin(a[..., 1:])
    return out


def _forward(tau: np.ndarray, X: np.ndarray, h_frac: np.ndarray, params: T2VParams):
    if X.shape[1] + params.k + 1 != params.n_inputs:
        raise ShapeMismatch(f"network expects {params.n_inputs - params.k - 1} features, got {X.shape[1]}")
    a = tau[:, None] * params.omega + params.phase
    emb = a.copy()
    emb[:, 1:] = np.sin(a[:, 1:])
    act = np.hstack([emb, X, h_frac[:, None]])
    cache = [(a, act)]
    n_layers = len(params.weights)
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        pre = act @ W + b
        act = np.maximum(pre, 0.0) if i < n_layers - 1 else pre
        cache.append((pre, act))
    return act[:, 0], cache


def forward(tau, X, h_frac, params: T2VParams) -> np.ndarray:
    """Prediction for each sample: [embed(tau), x, h_frac] through the dense stack."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    X = _as_matrix(X, len(tau))
    h_frac = np.broadcast_to(np.asarray(h_frac, dtype=float), tau.shape)
    return _forward(tau, X, h_frac, params)[0]


def loss_and_grads(
    tau: np.ndarray, X: np.ndarray, h_frac: np.ndarray, y: np.ndarray, params: T2VParams
) -> Tuple[float, List[np.ndarray]]:
    """Mean squared error and its gradient, ordered like ``params.arrays()``."""
    pred, cache = _forward(tau, X, h_frac, params)
    n = len(y)
    diff = pred - y
    loss = float(np.mean(diff**2))

    n_layers = len(params.weights)
    grad_w: List[np.ndarray] = [None] * n_layers
    grad_b: List[np.ndarray] = [None] * n_layers
    delta = (2.0 / n) * diff[:, None]
    for i in reversed(range(n_layers)):
        pre, _ = cache[i + 1]
        if i < n_layers - 1:
            delta = delta * (pre > 0)
        prev_act = cache[i][1]
        grad_w[i] = prev_act.T @ delta
        grad_b[i] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T

    a, _ = cache[0]
    d_a = delta[:, : params.k].copy()
    d_a[:, 1:] *= np.cos(a[:, 1:])
    grad_omega = (d_a * tau[:, None]).sum(axis=0)
    grad_phase = d_a.sum(axis=0)
    return loss, [grad_omega, grad_phase, *grad_w, *grad_b]


def gradient_check(
    tau: np.ndarray, X: np.ndarray, h_frac: np.ndarray, y: np.ndarray, params: T2VParams, eps: float = 1e-5
) -> float:
    """Max relative error between analytic and central finite-difference gradients."""
    _, analytic = loss_and_grads(tau, X, h_frac, y, params)
    worst = 0.0
    perturbed = copy.deepcopy(params)
    for arr, grad in zip(perturbed.arrays(), analytic):
        flat = arr.reshape(-1)
        g = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up, _ = loss_and_grads(tau, X, h_frac, y, perturbed)
            flat[i] = orig - eps
            down, _ = loss_and_grads(tau, X, h_frac, y, perturbed)
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(numeric), abs(g[i]), 1e-6)
            worst = max(worst, abs(numeric - g[i]) / denom)
    return worst


@dataclass
class Adam:
    lr: float
    scales: List[float]
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0

    def step(self, arrays: List[np.ndarray], grads: List[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for arr, g, m, v, scale in zip(arrays, grads, self.m, self.v, self.scales):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            arr -= scale * self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def carry_index(t: np.ndarray, h: np.ndarray, policy: str, season: int) -> np.ndarray:
    """Row whose exogenous values a forecast of row t, issued h steps earlier, would use."""
    origin = t - h + 1
    if policy == "seasonal":
        return origin - season + (h - 1) % season
    return origin - 1


@dataclass
class T2VModel:
    cfg: T2VConfig
    params: T2VParams
    t0: float
    span: float
    y_mean: float
    y_std: float
    x_tail: np.ndarray
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)

    def tau(self, t: np.ndarray) -> np.ndarray:
        return (np.asarray(t, dtype=float) - self.t0) / self.span

    def predict(self, t: np.ndarray, X: np.ndarray, h: np.ndarray) -> np.ndarray:
        out = forward(self.tau(t), X, np.asarray(h, dtype=float) / self.cfg.season, self.params)
        return out * self.y_std + self.y_mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "t0": self.t0,
            "span": self.span,
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "x_tail": self.x_tail.tolist(),
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
        }


def train_t2v(t: np.ndarray, X: np.ndarray, y: np.ndarray, cfg: T2VConfig, progress: bool = False) -> T2VModel:
    """
    Fit on rows (t, X, y). ``X`` must already be standardized and may have zero columns.

    Samples pair every eligible target row with a random horizon in 1..cfg.horizon;
    the last ``validation_fraction`` of targets drives early stopping.
    """
    t = np.asarray(t, dtype=float)
    X = _as_matrix(X, len(t))
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(cfg.seed)

    first = max(cfg.season, cfg.horizon) if cfg.exog_policy == "seasonal" else cfg.horizon
    targets = np.arange(first, len(y))
    if len(targets) < 2:
        raise TooFewRows(f"{len(y)} rows leave no training targets for horizon {cfg.horizon}")
    n_val = int(len(targets) * cfg.validation_fraction)
    train_idx, val_idx = targets[: len(targets) - n_val], targets[len(targets) - n_val :]

    t0 = float(t.min())
    span = float(t.max() - t.min()) or 1.0
    y_mean = float(y.mean())
    y_std = float(y.std())
    # a constant target keeps y_std at 0, so every prediction is exactly y_mean
    ys = (y - y_mean) / y_std if y_std > 0 else np.zeros_like(y)

    params = init_params(X.shape[1], cfg, span, rng)
    scales = [cfg.frequency_lr_scale] * 2 + [1.0] * (len(params.arrays()) - 2)
    adam = Adam(cfg.learning_rate, scales)

    def batch(idx: np.ndarray, h: np.ndarray):
        rows = np.clip(carry_index(idx, h, cfg.exog_policy, cfg.season), 0, None)
        return (t[idx] - t0) / span, X[rows], h / cfg.season, ys[idx]

    # fixed horizons for validation so epochs are comparable
    val_h = rng.integers(1, cfg.horizon + 1, size=len(val_idx))
    full_h = rng.integers(1, cfg.horizon + 1, size=len(train_idx))

    best = copy.deepcopy(params)
    best_score = np.inf
    stale = 0
    train_hist: List[float] = []
    val_hist: List[float] = []
    epochs = tqdm(range(cfg.max_epochs), desc="Time2Vec", unit="epoch", disable=not progress)
    for epoch in epochs:
        order = rng.permutation(len(train_idx))
        horizons = rng.integers(1, cfg.horizon + 1, size=len(train_idx))
        for lo in range(0, len(order), cfg.batch_size):
            sel = order[lo : lo + cfg.batch_size]
            loss, grads = loss_and_grads(*batch(train_idx[sel], horizons[sel]), params)
            if not np.isfinite(loss):
                raise Diverged(f"training loss became {loss} in epoch {epoch}")
            adam.step(params.arrays(), grads)

        tau_f, X_f, hf_f, y_f = batch(train_idx, full_h)
        train_loss = float(np.mean((forward(tau_f, X_f, hf_f, params) - y_f) ** 2))
        if not np.isfinite(train_loss):
            raise Diverged(f"training loss became {train_loss} in epoch {epoch}")
        train_hist.append(train_loss)
        score = train_loss
        if len(val_idx):
            tau_v, X_v, hf_v, y_v = batch(val_idx, val_h)
            score = float(np.mean((forward(tau_v, X_v, hf_v, params) - y_v) ** 2))
            val_hist.append(score)
        epochs.set_postfix({"train": f"{train_loss:.4g}", "val": f"{score:.4g}"}, refresh=False)

        if score < best_score:
            best_score, best, stale = score, copy.deepcopy(params), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info(f"Early stop after epoch {epoch + 1}; best score {best_score:.4g}")
                break

    tail_rows = max(cfg.season, cfg.horizon)
    return T2VModel(
        cfg=cfg,
        params=best,
        t0=t0,
        span=span,
        y_mean=y_mean,
        y_std=y_std,
        x_tail=X[-tail_rows:].copy(),
        train_loss=train_hist,
        val_loss=val_hist,
    )


def forecast_t2v(model: T2VModel, last_t: float, h: int) -> np.ndarray:
    """Predict rows last_t+1 .. last_t+h from the stored exogenous tail."""
    check_horizon(h)
    steps = np.arange(1, h + 1)
    t = last_t + steps
    n_tail = len(model.x_tail)
    rows = carry_index(t, steps, model.cfg.exog_policy, model.cfg.season) - (last_t + 1 - n_tail)
    rows = np.clip(rows, 0, n_tail - 1)
    return model.predict(t, model.x_tail[rows], steps)


class T2VForecaster(Forecaster):
    name = "t2v"

    def __init__(self, cfg: T2VConfig, standardize_columns: Optional[List[str]] = None, progress: bool = False):
        self.cfg = cfg
        self.standardize_columns = standardize_columns
        self.progress = progress
        self.model: Optional[T2VModel] = None
        self.scaling: Optional[ColumnStats] = None
        self.start = 0

    def fit(self, train: Dataset) -> "T2VForecaster":
        # inputs are every feature column; only the configured subset is rescaled
        self.scaling = fit_standardize(train, self.standardize_columns)
        X = apply_standardize(train, self.scaling).frame[FEATURE_COLUMNS].to_numpy(dtype=float)
        t = train.row_offset + np.arange(len(train))
        self.model = train_t2v(t, X, train.target, self.cfg, progress=self.progress)
        self.start = train.row_offset + len(train)
        return self

    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        values = forecast_t2v(self.model, self.start - 1, h)
        return ForecastSeries(self.name, self.start, values)

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(
            config=self.cfg.model_dump(),
            start=self.start,
            scaling=self.scaling.to_dict(),
            fitted=self.model.to_dict(),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "T2VForecaster":
        cfg = T2VConfig(**data["config"])
        fitted = data["fitted"]
        scaling = ColumnStats.from_dict(data["scaling"])
        out = cls(cfg, standardize_columns=list(scaling.values))
        out.scaling = scaling
        params = T2VParams.from_dict(fitted["params"])
        out.model = T2VModel(
            cfg=cfg,
            params=params,
            t0=float(fitted["t0"]),
            span=float(fitted["span"]),
            y_mean=float(fitted["y_mean"]),
            y_std=float(fitted["y_std"]),
            x_tail=np.asarray(fitted["x_tail"], dtype=float),
            train_loss=list(fitted["train_loss"]),
            val_loss=list(fitted["val_loss"]),
        )
        out.start = int(data["start"])
        return out
