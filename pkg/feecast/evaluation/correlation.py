import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..dataset import Dataset
from ..errors import TooFewRows

logger = logging.getLogger("Correlation")


@dataclass
class CorrelationMatrix:
    """
    Pearson r between dataset columns over pairwise-complete rows.

    Constant columns get r = 0 off the diagonal; ``gapped`` lists columns with
    missing values, whose correlations use only the rows where both are present.
    """

    columns: List[str]
    r: np.ndarray
    constant: List[str] = field(default_factory=list)
    gapped: List[str] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.r, index=self.columns, columns=self.columns)

    def get(self, a: str, b: str) -> float:
        return float(self.r[self.columns.index(a), self.columns.index(b)])


def correlation_matrix(d: Dataset, columns: Optional[Sequence[str]] = None) -> CorrelationMatrix:
    columns = list(columns) if columns is not None else list(d.column_names)
    if len(d) < 2:
        raise TooFewRows(f"correlation needs at least 2 rows, got {len(d)}")
    frame = d.frame[columns].astype(float)

    missing = frame.isna().sum()
    gapped = [c for c in columns if missing[c] > 0]
    if gapped:
        logger.warning(
            "Columns with missing values (pairwise-complete rows used): "
            + ", ".join(f"{c} ({missing[c]})" for c in gapped)
        )
    spread = frame.std(ddof=0)
    constant = [c for c in columns if not spread[c] > 0]
    if constant:
        logger.info(f"Constant columns (r defined as 0): {', '.join(constant)}")

    r = frame.corr(method="pearson", min_periods=2).to_numpy()
    r = np.clip(np.nan_to_num(r, nan=0.0), -1.0, 1.0)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(columns, r, constant, gapped)


def top_correlations(m: CorrelationMatrix, k: int = 10) -> List[Tuple[str, str, float]]:
    """Strongest off-diagonal pairs by |r|, each unordered pair once."""
    iu = np.triu_indices(len(m.columns), k=1)
    values = m.r[iu]
    order = np.argsort(-np.abs(values), kind="stable")[:k]
    return [(m.columns[iu[0][i]], m.columns[iu[1][i]], float(values[i])) for i in order]
