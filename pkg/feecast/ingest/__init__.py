"""Block, mempool and price acquisition from a Bitcoin Core node and a price API."""

from .poller import CsvSink, FeePoller, MemorySink, assemble_record, backfill_record, poll_loop
from .price import fetch_price
from .rpc import BitcoinRPC, RpcError, fetch_block_stats, fetch_mempool_snapshot

__all__ = [
    "BitcoinRPC",
    "CsvSink",
    "FeePoller",
    "MemorySink",
    "RpcError",
    "assemble_record",
    "backfill_record",
    "fetch_block_stats",
    "fetch_mempool_snapshot",
    "fetch_price",
    "poll_loop",
]
