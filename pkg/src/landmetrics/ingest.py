"""File loading, USD conversion, and winsorized dataset preparation.

Inputs are pre-exported CSV files:

* transactions: ``timestamp,native_price,currency,num_plots,tx_id``
* daily prices: ``date,symbol,usd_price``

Malformed transaction rows are never dropped silently; they come back as
(line, reason) pairs, and ``accepted + rejected == input rows`` always
holds.  wETH settles at the ETH quote (1:1 peg) and is the only currency
that sets ``paid_in_weth``.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientDataError, SchemaError, ValidationError
from .hedonic import Transaction
from .series import TimeSeries, summary_stats, winsorize

TRANSACTION_COLUMNS = ("timestamp", "native_price", "currency", "num_plots", "tx_id")
PRICE_COLUMNS = ("date", "symbol", "usd_price")

DEFAULT_STABLES = frozenset({"USDC", "USDT", "DAI"})


@dataclass(frozen=True)
class SchemaConfig:
    """Accepted currency symbols and stable-coin passthrough set.

    ``currencies=None`` accepts any symbol; otherwise a row whose currency
    is outside the set is rejected.  Stable currencies convert at 1.0
    without an fx quote.
    """

    currencies: frozenset[str] | None = None
    stable_currencies: frozenset[str] = DEFAULT_STABLES


@dataclass(frozen=True)
class RawTransactionRow:
    timestamp: dt.datetime
    native_price: float
    currency: str
    num_plots: int
    tx_id: str
    line: int


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class FxTable:
    """Daily USD quotes keyed by (date, symbol)."""

    quotes: dict = field(repr=False)

    def quote(self, date: dt.date, symbol: str) -> float | None:
        return self.quotes.get((date, symbol.upper()))

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(sorted({s for _, s in self.quotes}))

    def series(self, symbol: str, name: str | None = None) -> TimeSeries:
        symbol = symbol.upper()
        items = sorted((d, v) for (d, s), v in self.quotes.items() if s == symbol)
        if not items:
            raise ValidationError(f"no quotes for symbol {symbol!r}")
        return TimeSeries(
            name=name or symbol,
            freq="daily",
            dates=tuple(d for d, _ in items),
            values=np.array([v for _, v in items]),
        )


@dataclass(frozen=True)
class Dataset:
    metaverse: str
    transactions: tuple[Transaction, ...]
    coverage: tuple[dt.date, dt.date]
    rejected: tuple[RejectedRow, ...]

    def summary(self) -> dict:
        """Table-style descriptive stats of the accepted sample."""
        usd = [t.usd_price for t in self.transactions]
        plots = [float(t.num_plots) for t in self.transactions]
        weth = sum(1 for t in self.transactions if t.paid_in_weth)
        return {
            "n": len(self.transactions),
            "usd_price": summary_stats(usd),
            "num_plots": summary_stats(plots),
            "pct_weth": 100.0 * weth / len(self.transactions),
        }


def _parse_timestamp(text: str) -> dt.datetime:
    ts = dt.datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is not None:
        ts = ts.astimezone(dt.timezone.utc).replace(tzinfo=None)
    return ts


def load_transactions(path, schema: SchemaConfig = SchemaConfig()):
    """Parse a transactions CSV into (rows, rejected).

    The header must contain the five documented columns (extra columns
    are ignored).  Rows failing any field check are returned in
    ``rejected`` with their 1-based file line number.
    """
    rows: list[RawTransactionRow] = []
    rejected: list[RejectedRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, expected transactions header")
        header = [h.strip() for h in header]
        missing = [c for c in TRANSACTION_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required columns: {', '.join(missing)}")
        idx = {c: header.index(c) for c in TRANSACTION_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) < len(header):
                rejected.append(RejectedRow(lineno, "missing fields"))
                continue
            try:
                ts = _parse_timestamp(row[idx["timestamp"]])
            except ValueError:
                rejected.append(RejectedRow(lineno, "bad timestamp"))
                continue
            try:
                price = float(row[idx["native_price"]])
            except ValueError:
                rejected.append(RejectedRow(lineno, "bad price"))
                continue
            if not price > 0.0 or not np.isfinite(price):
                rejected.append(RejectedRow(lineno, "price <= 0"))
                continue
            plots_text = row[idx["num_plots"]].strip()
            try:
                plots = int(plots_text)
            except ValueError:
                rejected.append(RejectedRow(lineno, "bad plot count"))
                continue
            if plots < 1:
                rejected.append(RejectedRow(lineno, "plot count < 1"))
                continue
            currency = row[idx["currency"]].strip().upper()
            if not currency:
                rejected.append(RejectedRow(lineno, "missing currency"))
                continue
            if schema.currencies is not None and currency not in schema.currencies:
                rejected.append(RejectedRow(lineno, "unknown currency"))
                continue
            rows.append(
                RawTransactionRow(
                    timestamp=ts,
                    native_price=price,
                    currency=currency,
                    num_plots=plots,
                    tx_id=row[idx["tx_id"]].strip(),
                    line=lineno,
                )
            )
    return rows, rejected


def load_daily_prices(path) -> FxTable:
    """Parse a ``date,symbol,usd_price`` CSV into an FxTable.

    Duplicates and non-positive prices reject the whole load: quote
    tables are reference data and must be unambiguous.
    """
    quotes: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, expected price header")
        header = [h.strip() for h in header]
        missing = [c for c in PRICE_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing required columns: {', '.join(missing)}")
        idx = {c: header.index(c) for c in PRICE_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            try:
                date = dt.date.fromisoformat(row[idx["date"]].strip())
                price = float(row[idx["usd_price"]])
            except ValueError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from exc
            symbol = row[idx["symbol"]].strip().upper()
            if not symbol:
                raise ValidationError(f"{path}: line {lineno}: empty symbol")
            if not price > 0.0 or not np.isfinite(price):
                raise ValidationError(
                    f"{path}: line {lineno}: non-positive price for {symbol}"
                )
            key = (date, symbol)
            if key in quotes:
                raise ValidationError(
                    f"{path}: line {lineno}: duplicate quote for {symbol} on {date}"
                )
            quotes[key] = price
    return FxTable(quotes=quotes)


def to_usd(rows, fx: FxTable, stable_currencies: frozenset[str] = DEFAULT_STABLES):
    """Convert raw rows to USD Transactions; returns (transactions, rejected).

    wETH uses the ETH quote.  Stable currencies convert at exactly 1.0.
    Rows whose (date, currency) has no quote are rejected with reason
    ``"no fx for date"``.
    """
    out: list[Transaction] = []
    rejected: list[RejectedRow] = []
    for row in rows:
        cur = row.currency
        if cur in stable_currencies:
            rate = 1.0
        else:
            lookup = "ETH" if cur == "WETH" else cur
            rate = fx.quote(row.timestamp.date(), lookup)
            if rate is None:
                rejected.append(RejectedRow(row.line, "no fx for date"))
                continue
        out.append(
            Transaction(
                timestamp=row.timestamp,
                usd_price=row.native_price * rate,
                num_plots=row.num_plots,
                paid_in_weth=(cur == "WETH"),
                native_currency=cur,
                native_price=row.native_price,
            )
        )
    return out, rejected


def prepare_dataset(
    transactions,
    winsor_lo: float = 0.001,
    winsor_hi: float = 0.999,
    metaverse: str = "",
    rejected=(),
) -> Dataset:
    """Winsorize USD prices over the full sample and assemble a Dataset.

    Count, order, and dates are untouched; only prices outside the
    [winsor_lo, winsor_hi] sample quantiles are clamped.  Running the
    function on its own output is a fixed point.
    """
    txs = list(transactions)
    if len(txs) < 10:
        raise InsufficientDataError(f"need >= 10 transactions, got {len(txs)}")
    clamped = winsorize([t.usd_price for t in txs], winsor_lo, winsor_hi)
    new_txs = tuple(
        t if t.usd_price == c else replace(t, usd_price=float(c))
        for t, c in zip(txs, clamped)
    )
    dates = [t.date for t in new_txs]
    return Dataset(
        metaverse=metaverse,
        transactions=new_txs,
        coverage=(min(dates), max(dates)),
        rejected=tuple(rejected),
    )


def rejections_to_csv(rejected, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line", "reason"])
        for r in rejected:
            w.writerow([r.line, r.reason])
