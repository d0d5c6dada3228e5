from .backtest import BacktestRunner, FoldMetrics, FoldResult, MetricsReport, evaluate_fold, run_cv, run_test
from .compare import comparison_table, write_comparison
from .correlation import CorrelationMatrix, correlation_matrix, top_correlations
from .folds import CvFold, expanding_folds, holdout_fold
from .metrics import mae, naive_path, rmse, theils_u

__all__ = [
    "BacktestRunner",
    "CorrelationMatrix",
    "CvFold",
    "FoldMetrics",
    "FoldResult",
    "MetricsReport",
    "comparison_table",
    "correlation_matrix",
    "evaluate_fold",
    "expanding_folds",
    "holdout_fold",
    "mae",
    "naive_path",
    "rmse",
    "run_cv",
    "run_test",
    "theils_u",
    "top_correlations",
    "write_comparison",
]
