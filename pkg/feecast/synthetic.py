"""
Synthetic fee datasets with daily seasonality, for smoke runs and tests.

Each block draws a latent fee pressure (level + daily sinusoid + AR(1) noise),
samples a mempool from it, and derives every mempool column through the same
feature code the live poller uses, so generated rows satisfy all dataset checks.
"""

import logging
from typing import Optional

import numpy as np
from tqdm import tqdm

from .config import SEASON, FeatureSpec
from .dataset import Dataset, from_columns
from .features import histogram_features, mempool_fee_stats
from .schemas import CANONICAL_COLUMNS

logger = logging.getLogger("Synthetic")

GENESIS_TIME = 1_717_200_000
START_HEIGHT = 845_000
BLOCK_VERSION = 0x20000000
RATES_PER_BLOCK = 200


def synth_dataset(
    rows: int,
    seed: int = 0,
    spec: Optional[FeatureSpec] = None,
    season: int = SEASON,
    progress: bool = False,
) -> Dataset:
    if rows < 1:
        raise ValueError("rows must be >= 1")
    spec = spec or FeatureSpec()
    rng = np.random.default_rng(seed)

    noise = np.zeros(rows)
    shocks = rng.normal(0.0, 0.15, rows)
    for t in range(1, rows):
        noise[t] = 0.8 * noise[t - 1] + shocks[t]
    phase = 2.0 * np.pi * np.arange(rows) / season
    log_pressure = np.log(6.0) + 0.5 * np.sin(phase) + 0.2 * np.cos(2 * phase) + noise
    pressure = np.exp(log_pressure)

    intervals = np.maximum(1, rng.exponential(600.0, rows)).round().astype(np.int64)
    timestamps = GENESIS_TIME + np.cumsum(intervals)
    price = 62_000.0 * np.exp(np.cumsum(rng.normal(0.0, 0.001, rows)))
    difficulty = 8.3e13
    hash_rate = difficulty * 2**32 / 600.0

    values = np.empty((rows, len(CANONICAL_COLUMNS)))
    col = {name: i for i, name in enumerate(CANONICAL_COLUMNS)}
    for t in tqdm(range(rows), desc="Synthesizing", unit="block", disable=not progress):
        tx_count = int(rng.poisson(20_000 * pressure[t] / 6.0)) + 1
        rates = np.round(rng.lognormal(np.log(pressure[t]), 0.9, RATES_PER_BLOCK), 3)
        stats = {
            "timestamp": timestamps[t],
            "block_height": START_HEIGHT + t,
            "block_weight": float(rng.uniform(3.90e6, 3.99e6)),
            "block_interval": float(intervals[t]),
            "block_version": BLOCK_VERSION,
            "tx_count": float(tx_count),
            "mempool_size_mb": round(tx_count * 350 / 1e6, 6),
            "difficulty": difficulty,
            "hash_rate": hash_rate * float(rng.uniform(0.95, 1.05)),
            "bitcoin_price_usd": round(float(price[t]), 2),
            "block_median_fee_rate": round(float(pressure[t] * rng.uniform(0.9, 1.1)), 3),
            **mempool_fee_stats(rates),
            **histogram_features(rates, spec),
        }
        for name, value in stats.items():
            values[t, col[name]] = value

    logger.info(f"Generated {rows} synthetic blocks (seed {seed})")
    return from_columns(CANONICAL_COLUMNS, values, provenance="synthetic")
