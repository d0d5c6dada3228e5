"""
Minimal Bitcoin Core JSON-RPC client for the calls the fee pipeline needs.
"""

from __future__ import annotations

import itertools
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import requests

from ..errors import MalformedResponse, RpcUnreachable, UnknownBlock
from ..schemas import BlockStats, MempoolSnapshot, RpcEndpoint

logger = logging.getLogger("BitcoinRPC")

SATS_PER_BTC = 100_000_000

# RPC_INVALID_PARAMETER, RPC_INVALID_ADDRESS_OR_KEY
UNKNOWN_BLOCK_CODES = {-8, -5}


class RpcError(MalformedResponse):
    """Error object returned by the node; ``code`` is the JSON-RPC error code."""

    def __init__(self, code: int, message: str):
        super().__init__(f"RPC error {code}: {message}")
        self.code = code
        self.message = message


def _auth(ep: RpcEndpoint) -> Optional[Tuple[str, str]]:
    if ep.user is not None and ep.password is not None:
        return ep.user, ep.password
    if ep.cookie_file:
        try:
            user, _, password = Path(ep.cookie_file).read_text(encoding="utf-8").strip().partition(":")
        except OSError as e:
            raise RpcUnreachable(f"Cannot read cookie file {ep.cookie_file}: {e}")
        return user, password
    return None


class BitcoinRPC:
    """JSON-RPC 1.0 over HTTP; connection failures are retried ``max_retries`` times."""

    def __init__(self, ep: RpcEndpoint, session: Optional[requests.Session] = None):
        self.ep = ep
        self.session = session or requests.Session()
        self.session.auth = _auth(ep)
        self._ids = itertools.count(1)

    def call(self, method: str, *params: Any) -> Any:
        payload = {"jsonrpc": "1.0", "id": next(self._ids), "method": method, "params": list(params)}
        last_error: Optional[Exception] = None
        for attempt in range(self.ep.max_retries + 1):
            try:
                resp = self.session.post(self.ep.url, json=payload, timeout=self.ep.timeout)
            except requests.RequestException as e:
                last_error = e
                logger.debug(f"{method} attempt {attempt + 1} failed: {e}")
                continue
            return self._result(method, resp)
        raise RpcUnreachable(f"{self.ep.url} unreachable after {self.ep.max_retries + 1} attempts: {last_error}")

    @staticmethod
    def _result(method: str, resp: requests.Response) -> Any:
        # Core answers RPC errors with HTTP 404/500 and a JSON body
        try:
            body = resp.json()
        except ValueError:
            if resp.status_code == 401:
                raise RpcUnreachable("RPC authentication failed (HTTP 401)")
            raise MalformedResponse(f"{method}: HTTP {resp.status_code}, body is not JSON")
        if not isinstance(body, dict) or "result" not in body:
            raise MalformedResponse(f"{method}: missing 'result' in response")
        error = body.get("error")
        if error:
            raise RpcError(int(error.get("code", 0)), str(error.get("message", "")))
        return body["result"]

    def getblockcount(self) -> int:
        return int(self.call("getblockcount"))

    def getblockstats(self, height: int) -> Dict[str, Any]:
        return self.call("getblockstats", height)

    def getblockheader(self, blockhash: str) -> Dict[str, Any]:
        return self.call("getblockheader", blockhash)

    def getnetworkhashps(self, height: int) -> float:
        return float(self.call("getnetworkhashps", 120, height))

    def getmempoolinfo(self) -> Dict[str, Any]:
        return self.call("getmempoolinfo")

    def getrawmempool_verbose(self) -> Dict[str, Dict[str, Any]]:
        return self.call("getrawmempool", True)


def _median_feerate(stats: Dict[str, Any]) -> float:
    # feerate_percentiles = [10th, 25th, 50th, 75th, 90th]; absent or empty for coinbase-only blocks
    pct = stats.get("feerate_percentiles") or []
    return float(pct[2]) if len(pct) >= 3 else 0.0


def fetch_block_stats(rpc: BitcoinRPC, height: int, clock=time.time) -> BlockStats:
    """Block stats for ``height`` with the node's 50th-percentile feerate as the median fee rate."""
    try:
        stats = rpc.getblockstats(height)
        header = rpc.getblockheader(stats["blockhash"])
        hash_rate = rpc.getnetworkhashps(height)
    except RpcError as e:
        if e.code in UNKNOWN_BLOCK_CODES:
            raise UnknownBlock(f"block {height}: {e.message}")
        raise MalformedResponse(str(e))
    try:
        return BlockStats(
            height=int(stats["height"]),
            blockhash=str(stats["blockhash"]),
            weight=float(stats["total_weight"]),
            time=int(stats["time"]),
            version=int(header["version"]),
            median_fee_rate=_median_feerate(stats),
            difficulty=float(header["difficulty"]),
            hash_rate=hash_rate,
            observed_at=clock(),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedResponse(f"getblockstats/getblockheader for {height}: {e}")


def _fee_rates(entries: Dict[str, Dict[str, Any]]) -> List[float]:
    rates = []
    for entry in entries.values():
        fee = entry["fees"]["base"] if "fees" in entry else entry["fee"]
        rates.append(float(fee) * SATS_PER_BTC / float(entry["vsize"]))
    return rates


def fetch_mempool_snapshot(rpc: BitcoinRPC, clock=time.time) -> MempoolSnapshot:
    """Mempool size plus per-transaction fee/vsize rates from the verbose listing."""
    try:
        info = rpc.getmempoolinfo()
        entries = rpc.getrawmempool_verbose()
    except RpcError as e:
        raise MalformedResponse(str(e))
    try:
        rates = _fee_rates(entries)
        return MempoolSnapshot(
            tx_count=len(entries),
            size_mb=float(info["bytes"]) / 1e6,
            fee_rates=rates,
            taken_at=clock(),
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise MalformedResponse(f"mempool listing: {e}")
