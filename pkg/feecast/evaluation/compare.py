"""Side-by-side ranking of several models on the CV and hold-out protocols."""

import json
import math
from pathlib import Path
from typing import Dict, List

import pandas as pd

from .backtest import MetricsReport


def comparison_table(cv: Dict[str, MetricsReport], test: Dict[str, MetricsReport]) -> pd.DataFrame:
    """One row per model with mean CV metrics and test metrics, ranked by CV MAE."""
    rows = []
    for name in cv:
        row = {"model": name}
        row.update({f"cv_{k}": v for k, v in cv[name].aggregate().items()})
        if name in test:
            row.update({f"test_{k}": v for k, v in test[name].aggregate().items()})
        rows.append(row)
    frame = pd.DataFrame(rows)
    frame = frame.sort_values(["cv_mae", "model"], kind="stable", na_position="last").reset_index(drop=True)
    frame.insert(0, "rank", range(1, len(frame) + 1))
    return frame


def write_comparison(frame: pd.DataFrame, directory: str | Path) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "comparison.csv"
    json_path = directory / "comparison.json"
    frame.to_csv(csv_path, index=False, float_format="%.10g")
    records = [
        {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}
        for row in frame.to_dict(orient="records")
    ]
    json_path.write_text(json.dumps({"rankings": records}, indent=2) + "\n", encoding="utf-8")
    return [csv_path, json_path]
