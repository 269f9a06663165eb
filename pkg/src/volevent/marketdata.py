"""Price and case ingestion, log returns, calendar alignment and windows.

All window arithmetic is done in trading-day units on the aligned calendar.
A week counts 5 trading days and a month 25.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    EmptyIntersection,
    InsufficientHistory,
    MalformedRow,
    NonPositivePrice,
    OutcomeDateBeyondData,
    TooShortSeries,
    WindowOutOfRange,
)

__all__ = [
    "PricePoint",
    "ReturnSeries",
    "AlignedPanel",
    "OutcomeGroup",
    "EventCase",
    "WindowSpec",
    "UNIT_DAYS",
    "compute_log_returns",
    "align",
    "resolve_window",
    "estimation_range",
    "read_prices",
    "write_prices",
    "read_returns",
    "write_returns",
    "read_cases",
    "write_cases",
    "build_panel",
]

UNIT_DAYS = {"day": 1, "week": 5, "month": 25}

PRICE_COLUMNS = ("date", "ticker", "adj_close")
CASE_COLUMNS = (
    "case_id",
    "ticker",
    "outcome_date",
    "registration_date",
    "outcome_group",
    "amount_claimed",
    "amount_awarded",
)


def _as_day(value) -> np.datetime64:
    return np.datetime64(value, "D")


@dataclass(frozen=True)
class PricePoint:
    date: dt.date
    price: float


@dataclass(frozen=True)
class ReturnSeries:
    dates: np.ndarray
    returns: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        returns = np.asarray(self.returns, dtype=float)
        if dates.shape != returns.shape or dates.ndim != 1:
            raise DataError("dates and returns must be 1-d arrays of equal length")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")
        if not np.all(np.isfinite(returns)):
            raise DataError("returns must be finite")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    def __len__(self) -> int:
        return self.dates.size


@dataclass(frozen=True)
class AlignedPanel:
    dates: np.ndarray
    stock: np.ndarray
    market: np.ndarray

    def __len__(self) -> int:
        return self.dates.size

    def index_of(self, date) -> int:
        """Index of the first trading day on or after ``date``."""
        idx = int(np.searchsorted(self.dates, _as_day(date), side="left"))
        if idx >= self.dates.size:
            raise OutcomeDateBeyondData(
                f"date {date} is after the last trading day {self.dates[-1]}"
            )
        return idx


class OutcomeGroup(str, enum.Enum):
    INVESTOR = "investor"
    STATE = "state"
    SETTLED = "settled"

    @classmethod
    def parse(cls, text: str) -> "OutcomeGroup":
        key = text.strip().lower()
        aliases = {"settleddiscontinued": "settled", "discontinued": "settled"}
        key = aliases.get(key.replace("/", "").replace(" ", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown outcome group {text!r}; expected one of "
                + ", ".join(g.value for g in cls)
            ) from None


@dataclass(frozen=True)
class EventCase:
    case_id: str
    ticker: str
    outcome_date: dt.date
    outcome_group: OutcomeGroup
    registration_date: Optional[dt.date] = None
    amount_claimed: Optional[float] = None
    amount_awarded: Optional[float] = None
    covariates: Mapping[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("amount_claimed", "amount_awarded"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise DataError(f"case {self.case_id}: {name} must be nonnegative")


_LABEL_RE = re.compile(r"^\s*([+-]?\d+)\s*([a-z]*)\s*$")


def _parse_unit(text: str) -> str:
    text = text.strip().lower().rstrip("s")
    table = {"": "day", "d": "day", "day": "day", "w": "week", "week": "week",
             "m": "month", "month": "month"}
    try:
        return table[text]
    except KeyError:
        raise ValueError(f"unknown window unit {text!r}") from None


@dataclass(frozen=True)
class WindowSpec:
    """Announcement window ``[t_O - before, t_O + after]``.

    ``before`` and ``after`` are counts of ``before_unit``/``after_unit``;
    ``after_unit`` defaults to ``before_unit``.
    """

    before: int
    after: int
    before_unit: str = "day"
    after_unit: Optional[str] = None

    def __post_init__(self):
        if self.after_unit is None:
            object.__setattr__(self, "after_unit", self.before_unit)
        for unit in (self.before_unit, self.after_unit):
            if unit not in UNIT_DAYS:
                raise ValueError(f"unit must be one of {sorted(UNIT_DAYS)}, got {unit!r}")
        if self.before < 0 or self.after < 0:
            raise ValueError("window counts must be nonnegative")

    @property
    def n_before(self) -> int:
        return self.before * UNIT_DAYS[self.before_unit]

    @property
    def n_after(self) -> int:
        return self.after * UNIT_DAYS[self.after_unit]

    @property
    def length(self) -> int:
        return self.n_before + self.n_after + 1

    @property
    def label(self) -> str:
        def part(n, unit):
            return f"{n} {unit}" + ("s" if n != 1 else "")

        return f"(-{part(self.before, self.before_unit)},{part(self.after, self.after_unit)})"

    @property
    def key(self) -> str:
        return f"-{self.before}{self.before_unit[0]},+{self.after}{self.after_unit[0]}"

    @classmethod
    def parse(cls, text: str) -> "WindowSpec":
        """Parse ``"-2d,+2d"``, ``"-1 month,2 months"`` or ``"(-1 week,1 week)"``."""
        body = text.strip().strip("()")
        parts = body.split(",")
        if len(parts) != 2:
            raise ValueError(f"cannot parse window {text!r}")
        parsed = []
        for part in parts:
            m = _LABEL_RE.match(part.lower())
            if m is None:
                raise ValueError(f"cannot parse window {text!r}")
            parsed.append((abs(int(m.group(1))), _parse_unit(m.group(2))))
        (nb, ub), (na, ua) = parsed
        return cls(nb, na, ub, ua)


def compute_log_returns(prices: Sequence[PricePoint]) -> ReturnSeries:
    """Log returns ``ln(p[k+1] / p[k])`` dated at the later observation."""
    if len(prices) < 2:
        raise TooShortSeries(f"need at least 2 prices, got {len(prices)}")
    values = np.array([p.price for p in prices], dtype=float)
    bad = ~(np.isfinite(values) & (values > 0))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NonPositivePrice(f"price at {prices[k].date} is {values[k]!r}")
    dates = np.array([p.date for p in prices], dtype="datetime64[D]")
    return ReturnSeries(dates[1:], np.log(values[1:] / values[:-1]))


def align(stock: ReturnSeries, market: ReturnSeries) -> AlignedPanel:
    """Restrict both series to their common trading days."""
    if len(stock) == 0 or len(market) == 0:
        raise EmptyIntersection("cannot align an empty series")
    dates, i_s, i_m = np.intersect1d(
        stock.dates, market.dates, assume_unique=True, return_indices=True
    )
    if dates.size == 0:
        raise EmptyIntersection("stock and market calendars do not overlap")
    return AlignedPanel(dates, stock.returns[i_s], market.returns[i_m])


def resolve_window(panel: AlignedPanel, outcome_date, spec: WindowSpec) -> range:
    """Index range of the announcement window on the panel calendar.

    Outcome dates on non-trading days snap forward to the next trading day.
    """
    center = panel.index_of(outcome_date)
    start = center - spec.n_before
    stop = center + spec.n_after + 1
    if start < 0 or stop > len(panel):
        raise WindowOutOfRange(
            f"window {spec.label} around {outcome_date} needs indices "
            f"[{start}, {stop - 1}] but the panel has {len(panel)} days"
        )
    return range(start, stop)


def estimation_range(
    panel: AlignedPanel, outcome_date, spec: WindowSpec, length: int = 500
) -> range:
    """The ``length`` trading days ending the day before the window opens."""
    window = resolve_window(panel, outcome_date, spec)
    return history_before(window.start, length)


def history_before(start: int, length: int) -> range:
    if length < 1:
        raise ValueError("estimation length must be positive")
    if start < length:
        raise InsufficientHistory(
            f"window starts at index {start}; {length} prior days required"
        )
    return range(start - length, start)


def build_panel(
    prices: Mapping[str, Sequence[PricePoint]], ticker: str, market_ticker: str
) -> AlignedPanel:
    try:
        stock = prices[ticker]
    except KeyError:
        raise DataError(f"no prices for ticker {ticker!r}") from None
    try:
        market = prices[market_ticker]
    except KeyError:
        raise DataError(f"no prices for market ticker {market_ticker!r}") from None
    return align(compute_log_returns(stock), compute_log_returns(market))


# -- file formats -----------------------------------------------------------


def _check_header(path, header, required) -> None:
    if header is None:
        raise MalformedRow(path, 1, "file is empty")
    missing = [c for c in required if c not in header]
    if missing:
        raise MalformedRow(path, 1, f"missing column(s) {', '.join(missing)}")


def _parse_date(path, row, text) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise MalformedRow(path, row, f"bad ISO date {text!r}") from None


def _parse_float(path, row, column, text) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(path, row, f"bad number {text!r} in column {column}") from None
    if not math.isfinite(value):
        raise MalformedRow(path, row, f"non-finite value in column {column}")
    return value


def read_prices(path) -> dict[str, list[PricePoint]]:
    """Read a ``date,ticker,adj_close`` file into per-ticker price lists.

    Row numbers in errors count the header as row 1.
    """
    path = Path(path)
    series: dict[str, list[tuple[dt.date, float, int]]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, PRICE_COLUMNS)
        for row_no, row in enumerate(reader, start=2):
            if None in row or any(row[c] is None for c in PRICE_COLUMNS):
                raise MalformedRow(path, row_no, "wrong number of fields")
            ticker = row["ticker"].strip()
            if not ticker:
                raise MalformedRow(path, row_no, "empty ticker")
            date = _parse_date(path, row_no, row["date"])
            price = _parse_float(path, row_no, "adj_close", row["adj_close"])
            if price <= 0:
                raise MalformedRow(path, row_no, f"non-positive price {price!r}")
            series.setdefault(ticker, []).append((date, price, row_no))
    out = {}
    for ticker, rows in series.items():
        rows.sort(key=lambda r: r[0])
        for prev, cur in zip(rows, rows[1:]):
            if cur[0] == prev[0]:
                raise MalformedRow(path, cur[2], f"duplicate date {cur[0]} for {ticker}")
        out[ticker] = [PricePoint(d, p) for d, p, _ in rows]
    return out


def write_prices(path, prices: Mapping[str, Iterable[PricePoint]]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PRICE_COLUMNS)
        for ticker in prices:
            for p in prices[ticker]:
                writer.writerow([p.date.isoformat(), ticker, repr(float(p.price))])


def write_returns(path, series: ReturnSeries) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "log_return"])
        for d, r in zip(series.dates, series.returns):
            writer.writerow([str(d), repr(float(r))])


def read_returns(path) -> ReturnSeries:
    path = Path(path)
    dates, values = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, ("date", "log_return"))
        for row_no, row in enumerate(reader, start=2):
            dates.append(_parse_date(path, row_no, row["date"] or ""))
            values.append(_parse_float(path, row_no, "log_return", row["log_return"] or ""))
    return ReturnSeries(np.array(dates, dtype="datetime64[D]"), np.array(values))


def _parse_covariate(path, row_no, column, text):
    text = text.strip()
    if text == "":
        return None
    lowered = text.lower()
    if lowered in ("true", "yes"):
        return 1.0
    if lowered in ("false", "no"):
        return 0.0
    return _parse_float(path, row_no, column, text)


def read_cases(path) -> list[EventCase]:
    """Read the case file. Columns beyond the fixed set become covariates."""
    path = Path(path)
    cases = []
    seen = set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, CASE_COLUMNS)
        extra = [c for c in reader.fieldnames if c not in CASE_COLUMNS]
        for row_no, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise MalformedRow(path, row_no, "wrong number of fields")
            case_id = row["case_id"].strip()
            if not case_id:
                raise MalformedRow(path, row_no, "empty case_id")
            if case_id in seen:
                raise MalformedRow(path, row_no, f"duplicate case_id {case_id!r}")
            seen.add(case_id)
            ticker = row["ticker"].strip()
            if not ticker:
                raise MalformedRow(path, row_no, "empty ticker")
            if not row["outcome_date"].strip():
                raise MalformedRow(path, row_no, "outcome_date is required")
            outcome = _parse_date(path, row_no, row["outcome_date"])
            reg = row["registration_date"].strip()
            registration = _parse_date(path, row_no, reg) if reg else None
            try:
                group = OutcomeGroup.parse(row["outcome_group"])
            except ValueError as exc:
                raise MalformedRow(path, row_no, str(exc)) from None
            amounts = {}
            for name in ("amount_claimed", "amount_awarded"):
                text = row[name].strip()
                value = _parse_float(path, row_no, name, text) if text else None
                if value is not None and value < 0:
                    raise MalformedRow(path, row_no, f"{name} must be nonnegative")
                amounts[name] = value
            covariates = {c: _parse_covariate(path, row_no, c, row[c]) for c in extra}
            cases.append(
                EventCase(
                    case_id=case_id,
                    ticker=ticker,
                    outcome_date=outcome,
                    outcome_group=group,
                    registration_date=registration,
                    covariates=covariates,
                    **amounts,
                )
            )
    return cases


def write_cases(path, cases: Sequence[EventCase]) -> None:
    extra: list[str] = []
    for case in cases:
        for name in case.covariates:
            if name not in extra:
                extra.append(name)

    def fmt(value):
        return "" if value is None else repr(float(value))

    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(CASE_COLUMNS) + extra)
        for c in cases:
            writer.writerow(
                [
                    c.case_id,
                    c.ticker,
                    c.outcome_date.isoformat(),
                    c.registration_date.isoformat() if c.registration_date else "",
                    c.outcome_group.value,
                    fmt(c.amount_claimed),
                    fmt(c.amount_awarded),
                ]
                + [fmt(c.covariates.get(name)) for name in extra]
            )
