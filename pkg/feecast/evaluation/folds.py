from dataclasses import dataclass
from typing import List

from ..errors import InsufficientRows


@dataclass(frozen=True)
class CvFold:
    """Train rows [0, train_end), test rows [train_end, test_end)."""

    index: int
    train_end: int
    test_end: int

    @property
    def horizon(self) -> int:
        return self.test_end - self.train_end

    def to_dict(self) -> dict:
        return {"fold": self.index, "train": [0, self.train_end], "test": [self.train_end, self.test_end]}


def expanding_folds(n_rows: int, initial: int, step: int, horizon: int, k_folds: int) -> List[CvFold]:
    """Fold i trains on the first initial + i*step rows and tests on the next horizon rows."""
    if min(initial, step, horizon, k_folds) < 1:
        raise ValueError("initial, step, horizon and k_folds must all be >= 1")
    needed = initial + (k_folds - 1) * step + horizon
    if needed > n_rows:
        raise InsufficientRows(f"{k_folds} folds need {needed} rows, dataset has {n_rows}")
    return [CvFold(i, initial + i * step, initial + i * step + horizon) for i in range(k_folds)]


def holdout_fold(n_rows: int, test_len: int) -> CvFold:
    """Train on everything but the final ``test_len`` rows."""
    if test_len < 1:
        raise ValueError("test_len must be >= 1")
    if n_rows <= test_len:
        raise InsufficientRows(f"{n_rows} rows leave nothing to train on before a {test_len}-row test")
    return CvFold(0, n_rows - test_len, n_rows)
