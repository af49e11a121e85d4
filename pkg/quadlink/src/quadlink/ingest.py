import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
import requests

from quadlink.errors import QuadlinkError
from quadlink.files import write_atomic

logger = logging.getLogger(__name__)

STOOQ_ENDPOINT = "https://stooq.com/q/d/l/?s={symbol}&i=d"


class IngestError(QuadlinkError):
    pass


class MalformedHeader(IngestError, ValueError):
    pass


class UnparseableRow(IngestError, ValueError):
    def __init__(self, row: int, reason: str) -> None:
        super().__init__(f"row {row}: {reason}")
        self.row = row


class EmptySeries(IngestError, ValueError):
    pass


class DuplicateDate(IngestError, ValueError):
    pass


class DegenerateSplit(IngestError, ValueError):
    pass


class NetworkError(IngestError):
    pass


class InvalidSymbol(IngestError, ValueError):
    pass


class StorageError(IngestError):
    pass


class HttpStatusError(IngestError):
    def __init__(self, status: int, url: str) -> None:
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class PriceSeries:
    dates: np.ndarray
    closes: np.ndarray

    def __post_init__(self) -> None:
        dates = _frozen(np.asarray(self.dates, dtype="datetime64[D]"))
        closes = _frozen(np.asarray(self.closes, dtype=float))
        if dates.shape != closes.shape or dates.ndim != 1:
            raise ValueError("Dates and closes must be aligned 1-d arrays.")
        if len(closes) < 3:
            raise EmptySeries(
                f"Need at least 3 prices, got {len(closes)}."
            )
        if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise ValueError("Dates must be strictly increasing.")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise ValueError("Every close has to be positive and finite.")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "closes", closes)

    def __len__(self) -> int:
        return len(self.closes)


@dataclass(frozen=True)
class ReturnSeries:
    dates: np.ndarray
    returns: np.ndarray

    def __post_init__(self) -> None:
        dates = _frozen(np.asarray(self.dates, dtype="datetime64[D]"))
        returns = _frozen(np.asarray(self.returns, dtype=float))
        if dates.shape != returns.shape or returns.ndim != 1:
            raise ValueError("Dates and returns must be aligned 1-d arrays.")
        if len(returns) < 1:
            raise ValueError("Return series is empty.")
        if not np.all(np.isfinite(returns)):
            raise ValueError("Returns must be finite.")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    def __len__(self) -> int:
        return len(self.returns)

    def __getitem__(self, index: slice) -> "ReturnSeries":
        if not isinstance(index, slice):
            raise TypeError("Return series can only be sliced.")
        return ReturnSeries(self.dates[index], self.returns[index])


@dataclass(frozen=True)
class SplitReturns:
    in_sample: ReturnSeries
    out_sample: ReturnSeries
    fraction: float

    @property
    def t_oos(self) -> int:
        return len(self.out_sample)


def _find_column(columns: list, name: str) -> str:
    for column in columns:
        if str(column).strip().lower() == name.lower():
            return column
    raise MalformedHeader(
        f"Missing '{name}' column, header is {[str(c) for c in columns]}."
    )


def parse_price_csv(raw_text: str) -> PriceSeries:
    """Parses a delimited price table with at least Date and Close columns.

    Rows are sorted by date. Any row with a bad date, a missing or
    non-positive close is rejected with its 1-based data row index.
    """
    try:
        frame = pd.read_csv(
            io.StringIO(raw_text),
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise MalformedHeader(f"Can't read table: {e}") from e

    columns = list(frame.columns)
    date_column = _find_column(columns, "Date")
    close_column = _find_column(columns, "Close")

    raw_dates = frame[date_column].str.strip()
    raw_closes = frame[close_column].str.strip()
    dates = pd.to_datetime(raw_dates, format="%Y-%m-%d", errors="coerce")
    closes = pd.to_numeric(raw_closes, errors="coerce")

    for row, (date, close) in enumerate(zip(dates, closes), start=1):
        if pd.isna(date):
            raise UnparseableRow(row, f"bad date '{raw_dates.iloc[row - 1]}'")
        if pd.isna(close) or not math.isfinite(close):
            raise UnparseableRow(
                row, f"bad close '{raw_closes.iloc[row - 1]}'"
            )
        if close <= 0:
            raise UnparseableRow(row, f"non-positive close {close}")

    if len(frame) < 3:
        raise EmptySeries(f"Need at least 3 valid rows, got {len(frame)}.")

    table = pd.DataFrame({"date": dates, "close": closes})
    duplicated = table["date"].duplicated(keep=False)
    if duplicated.any():
        first = table.loc[duplicated, "date"].iloc[0].date()
        raise DuplicateDate(f"Date {first} appears more than once.")

    table = table.sort_values("date", kind="mergesort")
    return PriceSeries(
        dates=table["date"].to_numpy(dtype="datetime64[D]"),
        closes=table["close"].to_numpy(dtype=float),
    )


def decode_price_bytes(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        # data rows are 1-based, the header is line 0
        row = raw.count(b"\n", 0, e.start)
        raise UnparseableRow(row, "not valid UTF-8") from e


def read_price_file(path: Union[str, Path]) -> PriceSeries:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"Can't read {path}: {e}") from e
    return parse_price_csv(decode_price_bytes(raw))


def write_price_file(destination: Union[str, Path], text: str) -> int:
    try:
        return write_atomic(destination, text.encode("utf-8"))
    except OSError as e:
        raise StorageError(f"Can't write {destination}: {e}") from e


def format_price_csv(prices: PriceSeries) -> str:
    table = pd.DataFrame(
        {
            "Date": np.datetime_as_string(prices.dates, unit="D"),
            "Close": [repr(float(c)) for c in prices.closes],
        }
    )
    return table.to_csv(index=False, lineterminator="\n")


def fetch_remote_csv(
    symbol: str,
    endpoint: str = STOOQ_ENDPOINT,
    cache_dir: Optional[Path] = None,
    timeout: float = 30.0,
) -> str:
    """Downloads the daily CSV for a symbol and returns the body verbatim.

    A truncated body is reported as a network error. Nothing is written
    unless a cache directory is given, and then only after the full body
    was received.
    """
    if not symbol.strip():
        raise InvalidSymbol("Symbol can't be empty.")
    try:
        url = endpoint.format(symbol=symbol)
    except (KeyError, IndexError, ValueError) as e:
        raise NetworkError(f"Bad endpoint template {endpoint!r}.") from e
    logger.info(f"Fetching {url}...")

    try:
        response = requests.get(url, timeout=timeout)
        body = response.content
    except requests.RequestException as e:
        raise NetworkError(f"Transfer from {url} failed: {e}") from e

    if not response.ok:
        raise HttpStatusError(response.status_code, url)

    expected = response.headers.get("Content-Length")
    encoded = response.headers.get("Content-Encoding")
    if expected is not None and encoded is None:
        try:
            announced = int(expected)
        except ValueError as e:
            raise NetworkError(
                f"Malformed Content-Length {expected!r} from {url}."
            ) from e
        if announced != len(body):
            raise NetworkError(
                f"Connection closed after {len(body)} of {expected} bytes."
            )

    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as e:
        raise NetworkError(f"Response from {url} is not UTF-8.") from e
    if cache_dir is not None:
        try:
            cache_dir.mkdir(parents=True, exist_ok=True)
            write_atomic(cache_dir / f"{symbol}.csv", body)
        except OSError as e:
            raise StorageError(f"Can't cache {symbol}: {e}") from e
    logger.info(f"Fetched {len(body)} bytes.")
    return text


def to_log_returns(prices: PriceSeries) -> ReturnSeries:
    closes = prices.closes
    return ReturnSeries(
        dates=prices.dates[1:], returns=np.log(closes[1:] / closes[:-1])
    )


def prices_from_returns(
    returns: ReturnSeries, start_date: np.datetime64, start_close: float
) -> PriceSeries:
    """Rebuilds the price path by cumulative exponentiation."""
    closes = start_close * np.exp(np.cumsum(returns.returns))
    return PriceSeries(
        dates=np.concatenate(
            [np.array([start_date], dtype="datetime64[D]"), returns.dates]
        ),
        closes=np.concatenate([[start_close], closes]),
    )


def split(returns: ReturnSeries, fraction: float) -> SplitReturns:
    if not 0 < fraction < 1:
        raise DegenerateSplit(f"Fraction must lie in (0, 1), got {fraction}.")
    cut = math.floor(fraction * len(returns))
    if cut < 2 or len(returns) - cut < 2:
        raise DegenerateSplit(
            f"Splitting {len(returns)} returns at {fraction} leaves "
            f"{cut} in-sample and {len(returns) - cut} out-of-sample."
        )
    return SplitReturns(
        in_sample=returns[:cut], out_sample=returns[cut:], fraction=fraction
    )
