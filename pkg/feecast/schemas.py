# schemas.py
from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Canonical CSV column order. Everything between timestamp and the target is a
# model input; timestamp is kept as a temporal input as well.
FEATURE_COLUMNS: List[str] = [
    "block_height",
    "block_weight",
    "block_interval",
    "block_version",
    "tx_count",
    "mempool_size_mb",
    "min_fee_rate",
    "max_fee_rate",
    "avg_fee_rate",
    "median_fee_rate",
    "fee_rate_10th",
    "fee_rate_90th",
    "fee_rate_std",
    "difficulty",
    "hash_rate",
    "bitcoin_price_usd",
    "hist_low_fee_ratio",
    "hist_med_fee_ratio",
    "hist_high_fee_ratio",
    "fee_diversity",
]
TARGET_COLUMN = "block_median_fee_rate"
CANONICAL_COLUMNS: List[str] = ["timestamp", *FEATURE_COLUMNS, TARGET_COLUMN]
RAW_INPUT_COLUMNS: List[str] = ["timestamp", *FEATURE_COLUMNS]
INTEGER_COLUMNS = ("timestamp", "block_height", "block_version")

# Columns derived from the mempool; missing for backfilled rows.
MEMPOOL_COLUMNS: List[str] = [
    "tx_count",
    "mempool_size_mb",
    "min_fee_rate",
    "max_fee_rate",
    "avg_fee_rate",
    "median_fee_rate",
    "fee_rate_10th",
    "fee_rate_90th",
    "fee_rate_std",
    "hist_low_fee_ratio",
    "hist_med_fee_ratio",
    "hist_high_fee_ratio",
    "fee_diversity",
]

Provenance = Literal["live", "file", "synthetic"]


class FeeRecord(BaseModel):
    """
    One row of the canonical dataset. Fee rates are sat/vB; NaN marks a value
    that was not observed (e.g. mempool fields of a backfilled block).
    """

    timestamp: int = Field(..., description="Block time, unix seconds")
    block_height: int = Field(..., description="Block height")
    block_weight: float = Field(..., description="Block weight in weight units")
    block_interval: float = Field(..., description="Seconds since the previous block")
    block_version: int = Field(..., description="Block header version")
    tx_count: float = Field(..., description="Mempool transaction count")
    mempool_size_mb: float = Field(..., description="Mempool size in megabytes")
    min_fee_rate: float
    max_fee_rate: float
    avg_fee_rate: float
    median_fee_rate: float
    fee_rate_10th: float
    fee_rate_90th: float
    fee_rate_std: float
    difficulty: float
    hash_rate: float = Field(..., description="Network hash rate, hashes/second")
    bitcoin_price_usd: float
    hist_low_fee_ratio: float
    hist_med_fee_ratio: float
    hist_high_fee_ratio: float
    fee_diversity: float
    block_median_fee_rate: float = Field(..., description="Prediction target, sat/vB")

    model_config = ConfigDict(frozen=True, extra="forbid")


class Violation(BaseModel):
    row: int = Field(..., description="Zero-based row index in the dataset")
    rule: str = Field(..., description="Rule identifier, e.g. 'percentile_order'")
    detail: str = ""

    model_config = ConfigDict(frozen=True)


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def __len__(self) -> int:
        return len(self.violations)


# -------------------------------- ingest types
class RpcEndpoint(BaseModel):
    url: str = Field(..., description="JSON-RPC URL, e.g. http://127.0.0.1:8332")
    user: Optional[str] = None
    password: Optional[str] = None
    cookie_file: Optional[str] = Field(None, description="Path to the node's .cookie file")
    timeout: float = Field(30.0, gt=0)
    max_retries: int = Field(3, ge=0)

    model_config = ConfigDict(extra="forbid")


class PriceSource(BaseModel):
    url: str = Field(
        "https://api.coingecko.com/api/v3/simple/price?ids=bitcoin&vs_currencies=usd",
        description="HTTP GET endpoint returning JSON",
    )
    field_path: str = Field("bitcoin.usd", description="Dotted path to the USD price")
    timeout: float = Field(10.0, gt=0)

    model_config = ConfigDict(extra="forbid")


class BlockStats(BaseModel):
    height: int
    blockhash: str = ""
    weight: float
    time: int
    version: int
    median_fee_rate: float = Field(..., description="50th percentile feerate of the block")
    difficulty: float = float("nan")
    hash_rate: float = float("nan")
    observed_at: float = Field(..., description="Wall-clock time the stats were fetched")


class MempoolSnapshot(BaseModel):
    tx_count: int = Field(..., ge=0)
    size_mb: float = Field(..., ge=0)
    fee_rates: List[float] = Field(default_factory=list, description="Per-tx fee/vsize, sat/vB")
    taken_at: float

    @field_validator("fee_rates")
    @classmethod
    def _rates_nonnegative(cls, rates: List[float]) -> List[float]:
        if any(r < 0 for r in rates):
            raise ValueError("fee rates must be >= 0")
        return rates

    @model_validator(mode="after")
    def _count_matches(self) -> "MempoolSnapshot":
        if self.fee_rates and len(self.fee_rates) != self.tx_count:
            raise ValueError("fee_rates length must equal tx_count")
        return self


class PriceQuote(BaseModel):
    usd: float
    taken_at: float
