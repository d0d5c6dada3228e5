import logging
import time
from typing import Any, Optional

import requests

from ..errors import FieldMissing, HttpFailure
from ..schemas import PriceQuote, PriceSource

logger = logging.getLogger("PriceFeed")


def _lookup(body: Any, path: str) -> Any:
    node = body
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise FieldMissing(f"price field '{path}' missing at '{key}'")
        node = node[key]
    return node


def fetch_price(source: PriceSource, session: Optional[requests.Session] = None, clock=time.time) -> PriceQuote:
    """GET the configured URL and read the USD price at ``source.field_path``."""
    http = session or requests
    try:
        resp = http.get(source.url, timeout=source.timeout)
        resp.raise_for_status()
        body = resp.json()
    except requests.RequestException as e:
        raise HttpFailure(f"price request to {source.url} failed: {e}")
    except ValueError as e:
        raise HttpFailure(f"price response is not JSON: {e}")

    value = _lookup(body, source.field_path)
    try:
        usd = float(value)
    except (TypeError, ValueError):
        raise FieldMissing(f"price field '{source.field_path}' is not numeric: {value!r}")
    logger.debug(f"BTC/USD {usd}")
    return PriceQuote(usd=usd, taken_at=clock())
