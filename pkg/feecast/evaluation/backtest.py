"""
Expanding-window cross-validation and final hold-out test for any registered model.
"""

from __future__ import annotations

import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from ..config import PipelineConfig
from ..dataset import Dataset
from ..errors import ConstantActuals, LeakageError
from ..models import get_forecaster
from ..prep import FoldPreprocessor
from .folds import CvFold, expanding_folds, holdout_fold
from .metrics import mae, rmse, theils_u

logger = logging.getLogger("Backtest")

METRICS = ("mae", "rmse", "theils_u")


class FoldMetrics(BaseModel):
    fold: int
    train_end: int
    test_end: int
    mae: float
    rmse: float
    theils_u: float
    runtime_s: Optional[float] = None


class MetricsReport(BaseModel):
    model: str
    mode: Literal["cv", "test"]
    folds: List[FoldMetrics] = Field(default_factory=list)
    runtime_s: Optional[float] = None

    def aggregate(self) -> Dict[str, float]:
        """Unweighted mean across folds; a fold with undefined U is skipped for U."""
        out = {}
        for name in METRICS:
            values = [getattr(f, name) for f in self.folds if not math.isnan(getattr(f, name))]
            out[name] = float(np.mean(values)) if values else math.nan
        return out

    def to_json_dict(self, include_timings: bool = False) -> dict:
        exclude = None if include_timings else {"runtime_s": True, "folds": {"__all__": {"runtime_s"}}}
        data = self.model_dump(exclude=exclude)
        data["aggregate"] = self.aggregate()
        return data

    def to_frame(self, include_timings: bool = False) -> pd.DataFrame:
        rows = [f.model_dump() for f in self.folds]
        agg = self.aggregate()
        rows.append({"fold": "mean", "train_end": None, "test_end": None, **agg, "runtime_s": self.runtime_s})
        frame = pd.DataFrame(rows, columns=["fold", "train_end", "test_end", *METRICS, "runtime_s"])
        if not include_timings:
            frame = frame.drop(columns="runtime_s")
        return frame

    def write(self, directory: str | Path, include_timings: bool = False) -> Dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = f"{self.model}_{self.mode}"
        json_path = directory / f"{stem}_metrics.json"
        csv_path = directory / f"{stem}_metrics.csv"
        json_path.write_text(json.dumps(self.to_json_dict(include_timings), indent=2) + "\n", encoding="utf-8")
        self.to_frame(include_timings).to_csv(csv_path, index=False, float_format="%.10g")
        return {"json": json_path, "csv": csv_path}


@dataclass
class FoldResult:
    fold: CvFold
    actual: np.ndarray
    predicted: np.ndarray
    metrics: FoldMetrics


def score(fold: CvFold, actual: np.ndarray, predicted: np.ndarray, anchor: float) -> FoldMetrics:
    try:
        u = theils_u(actual, predicted, anchor)
    except ConstantActuals:
        logger.warning(f"Fold {fold.index}: actuals are constant, Theil's U undefined")
        u = math.nan
    return FoldMetrics(
        fold=fold.index,
        train_end=fold.train_end,
        test_end=fold.test_end,
        mae=mae(actual, predicted),
        rmse=rmse(actual, predicted),
        theils_u=u,
    )


def evaluate_fold(model_name: str, cfg: PipelineConfig, d: Dataset, fold: CvFold) -> FoldResult:
    """Fit preprocessing and the model on rows [0, train_end) and forecast the fold's test rows."""
    started = time.perf_counter()
    train = d.slice(0, fold.train_end)
    test = d.slice(fold.train_end, fold.test_end)

    prep = FoldPreprocessor(cfg.prep).fit(train)
    if not prep.clip_stats.precedes(test):
        raise LeakageError(f"fold {fold.index}: clip bounds fitted on rows {prep.clip_stats.row_range}")

    model = get_forecaster(model_name, cfg).fit(prep.transform(train))
    actual = test.target
    realized = actual if model.uses_realized_lag else None
    forecast = model.forecast(fold.horizon, realized)
    if forecast.start != fold.train_end:
        raise LeakageError(f"fold {fold.index}: forecast starts at row {forecast.start}, expected {fold.train_end}")

    metrics = score(fold, actual, forecast.values, anchor=float(train.target[-1]))
    metrics.runtime_s = time.perf_counter() - started
    return FoldResult(fold, actual, forecast.values, metrics)


class BacktestRunner:
    """Runs a model over CV folds or the hold-out split and writes metrics and logs to ``output_dir``."""

    def __init__(self, model_name: str, cfg: PipelineConfig, output_dir: str | Path, progress: bool = True):
        self.model_name = model_name
        self.cfg = cfg
        self.output_dir = Path(output_dir)
        self.progress = progress
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.results: List[FoldResult] = []

        self.summary_logger = self._setup_summary_logger()
        self.error_logger = self._setup_error_logger()

    def _setup_summary_logger(self):
        """Configure logger for summary and progress messages"""
        logger = logging.getLogger("BacktestRunner.Summary")
        logger.setLevel(logging.INFO)
        logger.handlers.clear()
        formatter = logging.Formatter("%(message)s")

        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        file_handler = logging.FileHandler(self.output_dir / "summary.log", mode="w")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        logger.propagate = False
        return logger

    def _setup_error_logger(self):
        """Configure logger for error and warning messages"""
        logger = logging.getLogger("BacktestRunner.Error")
        logger.setLevel(logging.WARNING)
        logger.handlers.clear()
        formatter = logging.Formatter("[%(levelname)s] %(message)s")

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        file_handler = logging.FileHandler(self.output_dir / "error.log", mode="w")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        logger.propagate = False
        return logger

    def close(self) -> None:
        for lg in (self.summary_logger, self.error_logger):
            for handler in lg.handlers:
                handler.close()
            lg.handlers.clear()

    def _header(self, title: str, folds: List[CvFold], n_rows: int) -> None:
        self.summary_logger.info("=" * 60)
        self.summary_logger.info(f"     {title}: {self.model_name}")
        self.summary_logger.info(f"     {len(folds)} fold(s) over {n_rows} rows, {self.cfg.cv.workers} worker(s)")
        for fold in folds:
            self.summary_logger.info(
                f"         - Fold {fold.index}: train [0, {fold.train_end}) test [{fold.train_end}, {fold.test_end})"
            )
        self.summary_logger.info("=" * 60)

    def _run(self, d: Dataset, folds: List[CvFold]) -> List[FoldResult]:
        results: Dict[int, FoldResult] = {}
        bar_fmt = "{l_bar}{bar}| {n_fmt}/{total_fmt} [{elapsed}<{remaining}] {postfix}"
        with tqdm(total=len(folds), desc="Folds", unit="fold", bar_format=bar_fmt, disable=not self.progress) as pbar:
            if self.cfg.cv.workers == 1 or len(folds) == 1:
                for fold in folds:
                    results[fold.index] = evaluate_fold(self.model_name, self.cfg, d, fold)
                    pbar.set_postfix({"MAE": f"{results[fold.index].metrics.mae:.4f}"}, refresh=True)
                    pbar.update(1)
            else:
                with ProcessPoolExecutor(max_workers=self.cfg.cv.workers) as executor:
                    future_to_fold = {
                        executor.submit(evaluate_fold, self.model_name, self.cfg, d, fold): fold for fold in folds
                    }
                    for future in as_completed(future_to_fold):
                        fold = future_to_fold[future]
                        try:
                            results[fold.index] = future.result()
                        except Exception as e:
                            self.error_logger.error(f"Fold {fold.index} failed with exception: {e}")
                            raise
                        pbar.set_postfix({"MAE": f"{results[fold.index].metrics.mae:.4f}"}, refresh=True)
                        pbar.update(1)
        return [results[i] for i in sorted(results)]

    def _report(self, mode: Literal["cv", "test"], results: List[FoldResult], runtime: float) -> MetricsReport:
        report = MetricsReport(model=self.model_name, mode=mode, folds=[r.metrics for r in results], runtime_s=runtime)
        agg = report.aggregate()
        self.summary_logger.info("=" * 60)
        self.summary_logger.info("     Summary:")
        for r in results:
            m = r.metrics
            self.summary_logger.info(
                f"         - Fold {m.fold}: MAE {m.mae:.4f}  RMSE {m.rmse:.4f}  U {m.theils_u:.4f}"
            )
        self.summary_logger.info(
            f"         - Mean:   MAE {agg['mae']:.4f}  RMSE {agg['rmse']:.4f}  U {agg['theils_u']:.4f}"
        )
        self.summary_logger.info("=" * 60)
        for r in results:
            if math.isnan(r.metrics.theils_u):
                self.error_logger.warning(f"Fold {r.fold.index}: Theil's U undefined (constant actuals)")
        report.write(self.output_dir, include_timings=self.cfg.output.include_timings)
        return report

    def run_cv(self, d: Dataset) -> MetricsReport:
        cv = self.cfg.cv
        folds = expanding_folds(len(d), cv.initial, cv.step, cv.horizon, cv.folds)
        self._header("EXPANDING-WINDOW CV", folds, len(d))
        started = time.perf_counter()
        self.results = self._run(d, folds)
        return self._report("cv", self.results, time.perf_counter() - started)

    def run_test(self, d: Dataset) -> MetricsReport:
        fold = holdout_fold(len(d), self.cfg.cv.test_len)
        self._header("HOLD-OUT TEST", [fold], len(d))
        started = time.perf_counter()
        self.results = self._run(d, [fold])
        return self._report("test", self.results, time.perf_counter() - started)


def run_cv(model_name: str, d: Dataset, cfg: PipelineConfig, output_dir: str | Path, progress: bool = False) -> MetricsReport:
    runner = BacktestRunner(model_name, cfg, output_dir, progress)
    try:
        return runner.run_cv(d)
    finally:
        runner.close()


def run_test(model_name: str, d: Dataset, cfg: PipelineConfig, output_dir: str | Path, progress: bool = False) -> MetricsReport:
    runner = BacktestRunner(model_name, cfg, output_dir, progress)
    try:
        return runner.run_test(d)
    finally:
        runner.close()
