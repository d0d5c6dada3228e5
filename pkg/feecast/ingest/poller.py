"""
Live acquisition loop: one FeeRecord per new chain tip, appended to a sink.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from pathlib import Path
from typing import Callable, List, Optional, Protocol

from tqdm import tqdm

from ..config import FeatureSpec, IngestConfig
from ..dataset import format_row
from ..errors import HttpFailure, MalformedResponse, RpcUnreachable, StaleInputs, UnknownBlock
from ..features import histogram_features, mempool_fee_stats
from ..schemas import CANONICAL_COLUMNS, MEMPOOL_COLUMNS, BlockStats, FeeRecord, MempoolSnapshot, PriceQuote
from .price import fetch_price
from .rpc import BitcoinRPC, fetch_block_stats, fetch_mempool_snapshot

logger = logging.getLogger("FeePoller")

# UnknownBlock covers a tip reported by getblockcount before its stats are indexed
TRANSIENT_ERRORS = (RpcUnreachable, MalformedResponse, HttpFailure, StaleInputs, UnknownBlock)


def _block_fields(stats: BlockStats, prev_block_time: int) -> dict:
    return {
        "timestamp": stats.time,
        "block_height": stats.height,
        "block_weight": stats.weight,
        "block_interval": float(stats.time - prev_block_time),
        "block_version": stats.version,
        "difficulty": stats.difficulty,
        "hash_rate": stats.hash_rate,
        "block_median_fee_rate": stats.median_fee_rate,
    }


def assemble_record(
    stats: BlockStats,
    snapshot: MempoolSnapshot,
    price: PriceQuote,
    prev_block_time: int,
    spec: Optional[FeatureSpec] = None,
    freshness_window: float = 120.0,
) -> FeeRecord:
    """Join block stats with a mempool snapshot and a price quote taken around block arrival."""
    spec = spec or FeatureSpec()
    for name, taken_at in (("mempool snapshot", snapshot.taken_at), ("price quote", price.taken_at)):
        age = abs(taken_at - stats.observed_at)
        if age > freshness_window:
            raise StaleInputs(f"{name} is {age:.0f}s away from block {stats.height} (window {freshness_window:.0f}s)")

    return FeeRecord(
        **_block_fields(stats, prev_block_time),
        tx_count=float(snapshot.tx_count),
        mempool_size_mb=snapshot.size_mb,
        bitcoin_price_usd=price.usd,
        **mempool_fee_stats(snapshot.fee_rates),
        **histogram_features(snapshot.fee_rates, spec),
    )


def backfill_record(stats: BlockStats, prev_block_time: int) -> FeeRecord:
    """Record for a block mined while the poller was away; mempool and price fields are missing."""
    missing = dict.fromkeys([*MEMPOOL_COLUMNS, "bitcoin_price_usd"], math.nan)
    return FeeRecord(**_block_fields(stats, prev_block_time), **missing)


class RecordSink(Protocol):
    def append(self, record: FeeRecord) -> None: ...

    def last_height(self) -> Optional[int]: ...


class MemorySink:
    def __init__(self):
        self.records: List[FeeRecord] = []

    def append(self, record: FeeRecord) -> None:
        self.records.append(record)

    def last_height(self) -> Optional[int]:
        return self.records[-1].block_height if self.records else None


class CsvSink:
    """Append-only canonical CSV; each record is written and flushed as one line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._last: Optional[int] = None
        if self.path.exists() and self.path.stat().st_size > 0:
            lines = self.path.read_text(encoding="utf-8").strip().splitlines()
            if len(lines) > 1:
                self._last = int(lines[-1].split(",")[CANONICAL_COLUMNS.index("block_height")])
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(",".join(CANONICAL_COLUMNS) + "\n", encoding="utf-8")

    def append(self, record: FeeRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(format_row(record) + "\n")
            f.flush()
        self._last = record.block_height

    def last_height(self) -> Optional[int]:
        return self._last


class FeePoller:
    """
    Watches the chain tip. Blocks between the last recorded height and the tip
    are backfilled from block stats alone; the tip itself gets a full record.
    Transient failures back off exponentially and never abort the loop.
    """

    def __init__(
        self,
        rpc: BitcoinRPC,
        cfg: IngestConfig,
        sink: RecordSink,
        spec: Optional[FeatureSpec] = None,
        sleep: Callable[[float], None] = time.sleep,
        stop: Optional[threading.Event] = None,
        price_fetcher: Callable[..., PriceQuote] = fetch_price,
    ):
        self.rpc = rpc
        self.cfg = cfg
        self.sink = sink
        self.spec = spec or FeatureSpec()
        self.sleep = sleep
        self.stop = stop or threading.Event()
        self.price_fetcher = price_fetcher
        self.failures = 0
        self.appended = 0
        self._prev_time: Optional[int] = None

    def backoff_delay(self) -> float:
        return min(self.cfg.backoff_cap, self.cfg.backoff_base * 2 ** (self.failures - 1))

    def _prev_block_time(self, height: int) -> int:
        if self._prev_time is None:
            self._prev_time = fetch_block_stats(self.rpc, height - 1).time if height > 0 else 0
        return self._prev_time

    def _append(self, record: FeeRecord) -> None:
        self.sink.append(record)
        self._prev_time = record.timestamp
        self.appended += 1

    def poll_once(self) -> int:
        """Append records for every block past the last recorded height; returns how many."""
        tip = self.rpc.getblockcount()
        last = self.sink.last_height()
        if last is None:
            last = tip - 1
        if tip <= last:
            return 0

        before = self.appended
        gap = range(last + 1, tip)
        if len(gap):
            logger.warning(f"Backfilling {len(gap)} blocks ({gap.start}..{gap.stop - 1}) without mempool data")
        for height in tqdm(gap, desc="Backfill", unit="block", disable=len(gap) < 10):
            stats = fetch_block_stats(self.rpc, height)
            self._append(backfill_record(stats, self._prev_block_time(height)))

        stats = fetch_block_stats(self.rpc, tip)
        snapshot = fetch_mempool_snapshot(self.rpc)
        price = self.price_fetcher(self.cfg.price)
        record = assemble_record(
            stats, snapshot, price, self._prev_block_time(tip), self.spec, self.cfg.freshness_window
        )
        self._append(record)
        logger.info(
            f"Block {tip}: median fee {record.block_median_fee_rate:.2f} sat/vB, "
            f"{snapshot.tx_count} mempool txs"
        )
        return self.appended - before

    def run(self, max_blocks: Optional[int] = None) -> int:
        """Poll until ``stop`` is set or ``max_blocks`` records were appended."""
        while not self.stop.is_set():
            if max_blocks is not None and self.appended >= max_blocks:
                break
            try:
                self.poll_once()
                self.failures = 0
                delay = self.cfg.poll_interval
            except TRANSIENT_ERRORS as e:
                self.failures += 1
                delay = self.backoff_delay()
                logger.warning(f"{type(e).__name__}: {e}; retrying in {delay:.0f}s")
            self.sleep(delay)
        return self.appended


def poll_loop(
    rpc: BitcoinRPC,
    cfg: IngestConfig,
    sink: RecordSink,
    spec: Optional[FeatureSpec] = None,
    max_blocks: Optional[int] = None,
    sleep: Callable[[float], None] = time.sleep,
    stop: Optional[threading.Event] = None,
) -> int:
    return FeePoller(rpc, cfg, sink, spec, sleep=sleep, stop=stop).run(max_blocks)
