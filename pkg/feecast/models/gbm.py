"""
Gradient-boosted regression trees on quantile-binned features, squared-error loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from ..config import SEASON, FeatureSpec, GbmConfig
from ..dataset import Dataset
from ..errors import ShapeMismatch, TooFewRows
from ..features import build_matrix, carry_rows
from .base import ForecastSeries, Forecaster, check_horizon

logger = logging.getLogger("GBM")

MIN_GAIN = 1e-12


@dataclass
class BinMapper:
    """Per-feature quantile cut points; bin b holds values in (cut[b-1], cut[b]]."""

    cuts: List[np.ndarray]

    @classmethod
    def fit(cls, X: np.ndarray, n_bins: int) -> "BinMapper":
        qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
        cuts = []
        for j in range(X.shape[1]):
            col = X[:, j]
            cut = np.unique(np.quantile(col, qs))
            cuts.append(cut[cut < col.max()])
        return cls(cuts)

    @property
    def n_features(self) -> int:
        return len(self.cuts)

    @property
    def max_bins(self) -> int:
        return max((len(c) + 1 for c in self.cuts), default=1)

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.int64)
        for j, cut in enumerate(self.cuts):
            out[:, j] = np.searchsorted(cut, X[:, j], side="left")
        return out


@dataclass
class Tree:
    """Array-encoded binary tree; ``feature == -1`` marks a leaf. Rows go left when bin <= threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def predict_binned(self, B: np.ndarray) -> np.ndarray:
        node = np.zeros(len(B), dtype=np.int64)
        while True:
            feat = self.feature[node]
            rows = np.flatnonzero(feat >= 0)
            if len(rows) == 0:
                return self.value[node]
            cur = node[rows]
            go_left = B[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])

    def to_dict(self) -> Dict[str, list]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, list]) -> "Tree":
        ints = {k: np.asarray(data[k], dtype=np.int64) for k in ("feature", "threshold", "left", "right")}
        return cls(**ints, value=np.asarray(data["value"], float), gain=np.asarray(data["gain"], float))


def _best_split(B: np.ndarray, r: np.ndarray, n_bins: int, min_leaf: int):
    """Best (gain, feature, threshold) over every feature's bin boundaries."""
    n, F = B.shape
    codes = (B + np.arange(F) * n_bins).ravel()
    sums = np.bincount(codes, weights=np.repeat(r, F), minlength=F * n_bins)
    counts = np.bincount(codes, minlength=F * n_bins)
    sums = sums.reshape(F, n_bins).cumsum(axis=1)
    counts = counts.reshape(F, n_bins).cumsum(axis=1)

    total, n_total = r.sum(), n
    n_right = n_total - counts
    ok = (counts >= min_leaf) & (n_right >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = sums**2 / counts + (total - sums) ** 2 / n_right - total**2 / n_total
    gain = np.where(ok, gain, -np.inf)
    flat = int(np.argmax(gain))
    feature, threshold = divmod(flat, n_bins)
    return float(gain[feature, threshold]), feature, threshold


def grow_tree(B: np.ndarray, r: np.ndarray, n_bins: int, max_depth: int, min_leaf: int) -> Tree:
    feature, threshold, left, right, value, gain = [], [], [], [], [], []

    def new_node(rows: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0)
        left.append(-1)
        right.append(-1)
        value.append(float(r[rows].mean()) if len(rows) else 0.0)
        gain.append(0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(len(r))), np.arange(len(r)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or len(rows) < 2 * min_leaf:
            continue
        g, f, thr = _best_split(B[rows], r[rows], n_bins, min_leaf)
        if not np.isfinite(g) or g <= MIN_GAIN:
            continue
        mask = B[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        feature[node], threshold[node], gain[node] = f, thr, g
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        gain=np.asarray(gain, dtype=float),
    )


@dataclass
class GbmModel:
    base: float
    learning_rate: float
    bins: BinMapper
    trees: List[Tree] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)

    @property
    def trees_used(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.bins.n_features

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatch(f"model expects {self.n_features} columns, got {X.shape}")
        B = self.bins.transform(X)
        out = np.full(len(X), self.base)
        for tree in self.trees:
            out += self.learning_rate * tree.predict_binned(B)
        return out

    def feature_importance(self) -> np.ndarray:
        """Total split gain per feature."""
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            splits = tree.feature >= 0
            np.add.at(imp, tree.feature[splits], tree.gain[splits])
        return imp

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base,
            "learning_rate": self.learning_rate,
            "cuts": [c.tolist() for c in self.bins.cuts],
            "trees": [t.to_dict() for t in self.trees],
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GbmModel":
        return cls(
            base=float(data["base"]),
            learning_rate=float(data["learning_rate"]),
            bins=BinMapper([np.asarray(c, dtype=float) for c in data["cuts"]]),
            trees=[Tree.from_dict(t) for t in data["trees"]],
            train_loss=list(data["train_loss"]),
            val_loss=list(data["val_loss"]),
        )


def fit_gbm(X: np.ndarray, y: np.ndarray, cfg: GbmConfig, progress: bool = False) -> GbmModel:
    """
    Stagewise residual fitting. The last ``validation_fraction`` of rows (time order)
    is held out for early stopping; the ensemble is truncated to its best round.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 2 * cfg.min_samples_leaf:
        raise TooFewRows(f"{len(y)} rows; need at least {2 * cfg.min_samples_leaf}")
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeMismatch(f"X {X.shape} does not match {len(y)} targets")

    n_val = int(len(y) * cfg.validation_fraction)
    if len(y) - n_val < 2 * cfg.min_samples_leaf:
        n_val = 0
    n_fit = len(y) - n_val
    X_fit, y_fit = X[:n_fit], y[:n_fit]

    bins = BinMapper.fit(X_fit, cfg.n_bins)
    B_fit = bins.transform(X_fit)
    B_val = bins.transform(X[n_fit:])
    model = GbmModel(base=float(y_fit.mean()), learning_rate=cfg.learning_rate, bins=bins)

    pred = np.full(n_fit, model.base)
    pred_val = np.full(n_val, model.base)
    best_val, best_round, stale = np.inf, 0, 0
    if n_val:
        best_val = float(np.mean((y[n_fit:] - pred_val) ** 2))
    rounds = tqdm(range(cfg.n_trees), desc="Boosting", unit="tree", disable=not progress)
    for m in rounds:
        resid = y_fit - pred
        tree = grow_tree(B_fit, resid, bins.max_bins, cfg.max_depth, cfg.min_samples_leaf)
        if tree.n_splits == 0:
            logger.debug(f"No admissible split at round {m}; stopping")
            break
        model.trees.append(tree)
        pred += cfg.learning_rate * tree.predict_binned(B_fit)
        model.train_loss.append(float(np.mean((y_fit - pred) ** 2)))

        if n_val:
            pred_val += cfg.learning_rate * tree.predict_binned(B_val)
            val = float(np.mean((y[n_fit:] - pred_val) ** 2))
            model.val_loss.append(val)
            if val < best_val:
                best_val, best_round, stale = val, len(model.trees), 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.debug(f"Early stop at round {m}; best round {best_round}")
                    break
        rounds.set_postfix({"loss": f"{model.train_loss[-1]:.4g}"}, refresh=False)

    if n_val:
        del model.trees[best_round:]
    logger.info(f"GBM kept {model.trees_used} trees (base {model.base:.4g})")
    return model


class GbmForecaster(Forecaster):
    """GBM over the engineered feature matrix; future rows use the exogenous carry policy."""

    name = "gbm"

    def __init__(self, cfg: GbmConfig, features: FeatureSpec, progress: bool = False):
        self.cfg = cfg
        self.features = features
        self.progress = progress
        self.model: Optional[GbmModel] = None
        self.x_tail = np.empty((0, 0))
        self.columns: List[str] = []
        self.start = 0

    def fit(self, train: Dataset) -> "GbmForecaster":
        matrix = build_matrix(train, self.features)
        self.model = fit_gbm(matrix.X, matrix.y, self.cfg, progress=self.progress)
        self.x_tail = matrix.X[-SEASON:].copy()
        self.columns = matrix.columns
        self.start = train.row_offset + len(train)
        return self

    def forecast(self, h: int, realized: Optional[np.ndarray] = None) -> ForecastSeries:
        check_horizon(h)
        X_future = carry_rows(self.x_tail, h, self.cfg.exog_policy, SEASON)
        return ForecastSeries(self.name, self.start, self.model.predict(X_future))

    def to_dict(self) -> Dict[str, Any]:
        return self.envelope(
            config=self.cfg.model_dump(),
            features=self.features.model_dump(),
            start=self.start,
            columns=self.columns,
            x_tail=self.x_tail.tolist(),
            fitted=self.model.to_dict(),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GbmForecaster":
        out = cls(GbmConfig(**data["config"]), FeatureSpec(**data["features"]))
        out.model = GbmModel.from_dict(data["fitted"])
        out.x_tail = np.asarray(data["x_tail"], dtype=float)
        out.columns = list(data["columns"])
        out.start = int(data["start"])
        return out
