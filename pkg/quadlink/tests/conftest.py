import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Iterator
from urllib.parse import parse_qs, urlparse

import numpy as np
import pytest

from quadlink.ingest import (
    ReturnSeries,
    format_price_csv,
    prices_from_returns,
)
from quadlink.volatility import GarchParams, simulate_garch


@pytest.fixture(scope="session")
def resources_dir() -> Path:
    return Path(os.path.dirname(__file__)) / "resources"


@pytest.fixture(scope="session")
def sample_prices_path(resources_dir) -> Path:
    """Synthetic daily bars in the Stooq column layout, not market data."""
    return resources_dir / "stooq_layout_sample.csv"


@pytest.fixture(scope="session")
def garch_params() -> GarchParams:
    return GarchParams(omega=0.1, alpha=0.05, beta=0.90)


@pytest.fixture(scope="session")
def garch_returns(garch_params) -> ReturnSeries:
    return simulate_garch(garch_params, n=2000, seed=11)


@pytest.fixture
def write_returns(tmp_path) -> Callable[[ReturnSeries, str], Path]:
    """Writes a return series as a price file in the Date,Close layout."""

    def write(returns: ReturnSeries, name: str = "prices.csv") -> Path:
        start = returns.dates[0] - np.timedelta64(1, "D")
        prices = prices_from_returns(returns, start, 100.0)
        path = tmp_path / name
        path.write_text(format_price_csv(prices), encoding="utf-8")
        return path

    return write


class _PriceHandler(BaseHTTPRequestHandler):
    body = b""

    def do_GET(self) -> None:
        query = parse_qs(urlparse(self.path).query)
        symbol = query.get("s", [""])[0]
        if symbol == "missing":
            self.send_error(404)
            return
        self.send_response(200)
        self.send_header("Content-Type", "text/csv")
        if symbol == "truncated":
            self.send_header("Content-Length", str(len(self.body) + 100))
        else:
            self.send_header("Content-Length", str(len(self.body)))
        self.end_headers()
        self.wfile.write(self.body)

    def log_message(self, format, *args) -> None:
        pass


@pytest.fixture
def price_server(sample_prices_path) -> Iterator[str]:
    """Serves the sample price file and returns an endpoint template.

    Symbol ``missing`` answers 404 and ``truncated`` announces more bytes
    than it sends.
    """
    handler = type(
        "Handler", (_PriceHandler,), {"body": sample_prices_path.read_bytes()}
    )
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}/q/d/l/?s={{symbol}}&i=d"
    server.shutdown()
    server.server_close()
