"""
Price ingestion, log returns and jump regularization.

Daily closes are turned into log returns ``r(t) = ln(p(t+1) / p(t))``. Days on
which the simple price ratio moves by more than ``cutoff`` (splits, dividends,
index replacements) are regularized by setting the return to exactly zero.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "IndexSeries",
    "PriceSeries",
    "ReturnSeries",
    "index_returns",
    "load_index",
    "load_prices",
    "load_returns",
    "save_returns",
    "split_signs",
    "to_returns",
]

CUTOFF_RANGE = (0.05, 0.5)
ZEROED_WARN_FRACTION = 0.01


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing prices of one instrument, ordered by trading day."""

    symbol: str
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self) -> None:
        closes = _readonly(self.closes)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", tuple(self.dates))
        if closes.ndim != 1:
            raise DataError("closes must be one-dimensional")
        if len(self.dates) != closes.size:
            raise DataError(
                f"{len(self.dates)} dates but {closes.size} closing prices"
            )
        if closes.size and not np.all(closes > 0):
            bad = int(np.flatnonzero(~(closes > 0))[0])
            raise DataError(f"non-positive price {closes[bad]!r} at index {bad}")
        for i in range(1, len(self.dates)):
            if self.dates[i] <= self.dates[i - 1]:
                raise DataError(f"dates not strictly increasing at index {i}")

    def __len__(self) -> int:
        return self.closes.size


@dataclass(frozen=True)
class ReturnSeries:
    """
    Log returns with jump regularization bookkeeping.

    Attributes
    ----------
    symbol : str
        Instrument identifier.
    returns : ndarray
        Log returns, read-only.
    zeroed_count : int
        Number of returns set to zero by the jump filter.
    cutoff : float or None
        Jump threshold on the simple price ratio; ``None`` when no filter
        was applied (index returns, simulated data).
    dates : tuple of date
        Date attached to each return (the date of the later price), may be
        empty for synthetic series.
    """

    symbol: str
    returns: np.ndarray
    zeroed_count: int = 0
    cutoff: float | None = None
    dates: tuple[dt.date, ...] = field(default=())

    def __post_init__(self) -> None:
        r = _readonly(self.returns)
        if r.ndim != 1:
            raise DataError("returns must be one-dimensional")
        if not np.all(np.isfinite(r)):
            raise DataError("returns contain non-finite values")
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(self.dates))
        if self.dates and len(self.dates) != r.size:
            raise DataError("dates and returns differ in length")

    def __len__(self) -> int:
        return self.returns.size

    @property
    def r_plus(self) -> np.ndarray:
        return split_signs(self)[0]

    @property
    def r_minus(self) -> np.ndarray:
        return split_signs(self)[1]

    @property
    def zeroed_fraction(self) -> float:
        return self.zeroed_count / len(self) if len(self) else 0.0


@dataclass(frozen=True)
class IndexSeries:
    """Index level ``I(t)`` with its divisor ``D(t)``."""

    dates: tuple[dt.date, ...]
    values: np.ndarray
    divisors: np.ndarray
    symbol: str = "INDEX"

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        divisors = _readonly(self.divisors)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "divisors", divisors)
        object.__setattr__(self, "dates", tuple(self.dates))
        if values.shape != divisors.shape:
            raise DataError("index values and divisors differ in length")
        if self.dates and len(self.dates) != values.size:
            raise DataError("dates and index values differ in length")
        if not (np.all(values > 0) and np.all(divisors > 0)):
            raise DataError("index values and divisors must be strictly positive")

    def __len__(self) -> int:
        return self.values.size


def _read_rows(path, columns):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in columns]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                yield lineno, [row[i].strip() for i in idx]
            except IndexError:
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields") from None


def _parse_date(text, where):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise DataError(f"{where}: bad ISO-8601 date {text!r}") from None


def _parse_float(text, where):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: bad number {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: non-finite number {text!r}")
    return value


def _sorted_unique(path, records):
    records.sort(key=lambda rec: rec[0])
    for (d0, *_), (d1, *_) in zip(records, records[1:]):
        if d0 == d1:
            raise DataError(f"{path}: duplicate date {d1.isoformat()}")
    return records


def load_prices(
    path,
    date_column: str = "date",
    close_column: str = "close",
    symbol: str | None = None,
) -> PriceSeries:
    """
    Read a ``date,close`` CSV file into a :class:`PriceSeries`.

    Rows are sorted by date; duplicated dates and non-positive prices are
    errors. Errors name the offending line.
    """
    records = []
    for lineno, (d, c) in _read_rows(path, (date_column, close_column)):
        where = f"{path}:{lineno}"
        close = _parse_float(c, where)
        if close <= 0:
            raise DataError(f"{where}: non-positive price {close!r}")
        records.append((_parse_date(d, where), close))
    records = _sorted_unique(path, records)
    return PriceSeries(
        symbol=symbol or Path(path).stem,
        dates=tuple(r[0] for r in records),
        closes=np.array([r[1] for r in records]),
    )


def load_index(
    path,
    date_column: str = "date",
    value_column: str = "close",
    divisor_column: str = "divisor",
) -> IndexSeries:
    """Read an index CSV with level and divisor columns."""
    records = []
    for lineno, (d, v, q) in _read_rows(path, (date_column, value_column, divisor_column)):
        where = f"{path}:{lineno}"
        value, divisor = _parse_float(v, where), _parse_float(q, where)
        if value <= 0 or divisor <= 0:
            raise DataError(f"{where}: non-positive index value or divisor")
        records.append((_parse_date(d, where), value, divisor))
    records = _sorted_unique(path, records)
    return IndexSeries(
        dates=tuple(r[0] for r in records),
        values=np.array([r[1] for r in records]),
        divisors=np.array([r[2] for r in records]),
        symbol=Path(path).stem,
    )


def to_returns(prices: PriceSeries, cutoff: float = 0.15) -> ReturnSeries:
    """
    Log returns of a price series with the jump filter applied.

    A return is replaced by zero when ``|p(t+1)/p(t) - 1| > cutoff``. The
    test is on the simple ratio; the log-return magnitude of surviving points
    is then bounded by ``ln(1 + cutoff)`` from above on the upside.

    Parameters
    ----------
    prices : PriceSeries
        At least two closes.
    cutoff : float, default 0.15
        Jump threshold, must lie in ``[0.05, 0.5]``.
    """
    lo, hi = CUTOFF_RANGE
    if not lo <= cutoff <= hi:
        raise ValueError(f"cutoff must lie in [{lo}, {hi}], got {cutoff}")
    if len(prices) < 2:
        raise DataError("need at least two prices to form a return")
    p = prices.closes
    ratio = p[1:] / p[:-1]
    r = np.log(ratio)
    jumps = np.abs(ratio - 1.0) > cutoff
    r[jumps] = 0.0
    out = ReturnSeries(
        symbol=prices.symbol,
        returns=r,
        zeroed_count=int(jumps.sum()),
        cutoff=cutoff,
        dates=prices.dates[1:] if prices.dates else (),
    )
    if out.zeroed_fraction > ZEROED_WARN_FRACTION:
        warnings.warn(
            f"{prices.symbol}: {out.zeroed_count} of {len(out)} returns "
            f"({100 * out.zeroed_fraction:.2f}%) removed by the {cutoff:.0%} jump filter",
            stacklevel=2,
        )
    return out


def split_signs(returns: ReturnSeries | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(r_plus, r_minus)`` with ``r_plus + r_minus == r`` exactly."""
    r = returns.returns if isinstance(returns, ReturnSeries) else np.asarray(returns, dtype=float)
    r_plus = np.where(r > 0, r, 0.0)
    r_minus = np.where(r < 0, r, 0.0)
    return r_plus, r_minus


def index_returns(index: IndexSeries) -> ReturnSeries:
    """Divisor-adjusted index log returns; no jump filter is applied."""
    if len(index) < 2:
        raise DataError("need at least two index levels")
    level = np.log(index.values) - np.log(index.divisors)
    return ReturnSeries(
        symbol=index.symbol,
        returns=np.diff(level),
        dates=index.dates[1:] if index.dates else (),
    )


def save_returns(series: ReturnSeries, path) -> None:
    """Write returns as CSV (``date,return`` or ``t,return`` without dates)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if series.dates:
            writer.writerow(["date", "return"])
            for d, r in zip(series.dates, series.returns):
                writer.writerow([d.isoformat(), repr(float(r))])
        else:
            writer.writerow(["t", "return"])
            for t, r in enumerate(series.returns):
                writer.writerow([t, repr(float(r))])


def load_returns(path, symbol: str | None = None) -> ReturnSeries:
    """Read a return CSV written by :func:`save_returns`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise DataError(f"{path}: empty file")
    key = "date" if "date" in [h.strip() for h in header] else "t"
    dates, values = [], []
    for lineno, (k, r) in _read_rows(path, (key, "return")):
        where = f"{path}:{lineno}"
        if key == "date":
            dates.append(_parse_date(k, where))
        values.append(_parse_float(r, where))
    return ReturnSeries(symbol=symbol or path.stem, returns=np.array(values), dates=tuple(dates))
