"""CSV ingestion, USD conversion, and dataset preparation tests."""

import datetime as dt

import numpy as np
import pytest

from landmetrics.errors import (
    InsufficientDataError,
    SchemaError,
    ValidationError,
)
from landmetrics.ingest import (
    FxTable,
    SchemaConfig,
    load_daily_prices,
    load_transactions,
    prepare_dataset,
    rejections_to_csv,
    to_usd,
)
from landmetrics.series import summary_stats

from oracles import winsorize_oracle

TX_HEADER = "timestamp,native_price,currency,num_plots,tx_id"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture
def tx_file(tmp_path):
    rows = [
        TX_HEADER,
        "2021-01-04T12:00:00,2.0,ETH,1,t1",
        "2021-01-05T09:30:00Z,5.0,wEth,2,t2",
        "2021-01-06T00:00:00,100.0,USDC,1,t3",
        "not-a-time,1.0,ETH,1,t4",
        "2021-01-07T00:00:00,abc,ETH,1,t5",
        "2021-01-07T01:00:00,-3.0,ETH,1,t6",
        "2021-01-07T02:00:00,1.0,ETH,x,t7",
        "2021-01-07T03:00:00,1.0,ETH,0,t8",
        "2021-01-07T04:00:00,1.0,,1,t9",
        "2021-01-07T05:00:00,1.0,ETH",
    ]
    return write(tmp_path, "tx.csv", "\n".join(rows) + "\n")


@pytest.fixture
def fx():
    quotes = {}
    for i, px in enumerate((1000.0, 1100.0, 1200.0, 1300.0)):
        quotes[(dt.date(2021, 1, 4) + dt.timedelta(days=i), "ETH")] = px
    return FxTable(quotes=quotes)


# ---------------------------------------------------------------------------
# load_transactions
# ---------------------------------------------------------------------------


def test_accepted_rows_match_field_splitting_oracle(tx_file):
    rows, rejected = load_transactions(tx_file)
    text = tx_file.read_text().splitlines()[1:]
    good = {line.split(",")[4]: line.split(",") for line in text
            if len(line.split(",")) == 5}
    assert [r.tx_id for r in rows] == ["t1", "t2", "t3"]
    for r in rows:
        fields = good[r.tx_id]
        assert r.native_price == float(fields[1])
        assert r.currency == fields[2].upper()
        assert r.num_plots == int(fields[3])


def test_rejection_reasons_and_line_numbers(tx_file):
    rows, rejected = load_transactions(tx_file)
    assert len(rows) == 3
    got = {(r.line, r.reason) for r in rejected}
    assert got == {
        (5, "bad timestamp"),
        (6, "bad price"),
        (7, "price <= 0"),
        (8, "bad plot count"),
        (9, "plot count < 1"),
        (10, "missing currency"),
        (11, "missing fields"),
    }


def test_count_conservation(tx_file):
    rows, rejected = load_transactions(tx_file)
    n_data_lines = len(tx_file.read_text().splitlines()) - 1
    assert len(rows) + len(rejected) == n_data_lines


def test_timestamps_normalized_to_utc(tx_file):
    rows, _ = load_transactions(tx_file)
    t2 = next(r for r in rows if r.tx_id == "t2")
    assert t2.timestamp == dt.datetime(2021, 1, 5, 9, 30)
    assert t2.timestamp.tzinfo is None


def test_currency_whitelist(tx_file):
    schema = SchemaConfig(currencies=frozenset({"ETH"}))
    rows, rejected = load_transactions(tx_file, schema)
    assert [r.tx_id for r in rows] == ["t1"]
    assert sum(1 for r in rejected if r.reason == "unknown currency") == 2


def test_header_permutation_and_extras_tolerated(tmp_path):
    p = write(
        tmp_path,
        "t.csv",
        "tx_id,num_plots,extra,currency,native_price,timestamp\n"
        "t1,3,zzz,ETH,1.5,2021-01-04T00:00:00\n",
    )
    rows, rejected = load_transactions(p)
    assert len(rows) == 1 and not rejected
    assert rows[0].num_plots == 3
    assert rows[0].native_price == 1.5


def test_missing_column_is_schema_error(tmp_path):
    p = write(tmp_path, "t.csv", "timestamp,native_price,currency,num_plots\na,b,c,d\n")
    with pytest.raises(SchemaError, match="tx_id"):
        load_transactions(p)
    empty = write(tmp_path, "e.csv", "")
    with pytest.raises(SchemaError, match="empty"):
        load_transactions(empty)


def test_header_only_file_gives_empty_lists(tmp_path):
    p = write(tmp_path, "t.csv", TX_HEADER + "\n")
    rows, rejected = load_transactions(p)
    assert rows == [] and rejected == []


def test_blank_lines_skipped(tmp_path):
    p = write(
        tmp_path,
        "t.csv",
        TX_HEADER + "\n\n2021-01-04T00:00:00,1.0,ETH,1,t1\n,,,,\n",
    )
    rows, rejected = load_transactions(p)
    assert len(rows) == 1 and not rejected


# ---------------------------------------------------------------------------
# load_daily_prices / FxTable
# ---------------------------------------------------------------------------


def test_price_loading_happy_path(tmp_path):
    p = write(
        tmp_path,
        "px.csv",
        "date,symbol,usd_price\n"
        "2021-01-05,eth,1100.5\n"
        "2021-01-04,ETH,1000.0\n"
        "2021-01-04,VOX,2.5\n",
    )
    fx = load_daily_prices(p)
    assert fx.quote(dt.date(2021, 1, 4), "ETH") == 1000.0
    assert fx.quote(dt.date(2021, 1, 5), "eth") == 1100.5
    assert fx.quote(dt.date(2021, 1, 9), "ETH") is None
    assert fx.symbols == ("ETH", "VOX")
    s = fx.series("eth")
    assert s.name == "ETH"
    assert s.dates == (dt.date(2021, 1, 4), dt.date(2021, 1, 5))
    with pytest.raises(ValidationError, match="no quotes"):
        fx.series("BTC")


def test_duplicate_quote_rejected(tmp_path):
    p = write(
        tmp_path,
        "px.csv",
        "date,symbol,usd_price\n2021-01-04,ETH,1000\n2021-01-04,ETH,1001\n",
    )
    with pytest.raises(ValidationError, match="line 3.*duplicate"):
        load_daily_prices(p)


def test_nonpositive_or_malformed_price_rejected(tmp_path):
    p = write(tmp_path, "px.csv", "date,symbol,usd_price\n2021-01-04,ETH,0\n")
    with pytest.raises(ValidationError, match="non-positive"):
        load_daily_prices(p)
    q = write(tmp_path, "px2.csv", "date,symbol,usd_price\nJan 4,ETH,5\n")
    with pytest.raises(ValidationError, match="line 2"):
        load_daily_prices(q)


# ---------------------------------------------------------------------------
# to_usd
# ---------------------------------------------------------------------------


def test_usd_conversion_values(tx_file, fx):
    rows, _ = load_transactions(tx_file)
    txs, rejected = to_usd(rows, fx)
    assert not rejected
    t1 = txs[0]
    assert t1.usd_price == 2.0 * 1000.0
    assert t1.paid_in_weth is False
    weth = txs[1]
    assert weth.usd_price == 5.0 * 1100.0  # wETH settles at the ETH quote
    assert weth.paid_in_weth is True
    assert weth.native_currency == "WETH"
    stable = txs[2]
    assert stable.usd_price == 100.0  # exactly 1.0, no quote needed


def test_missing_quote_rejects_row(fx):
    from landmetrics.ingest import RawTransactionRow

    row = RawTransactionRow(
        timestamp=dt.datetime(2020, 12, 25, 12),
        native_price=1.0,
        currency="ETH",
        num_plots=1,
        tx_id="xmas",
        line=42,
    )
    txs, rejected = to_usd([row], fx)
    assert txs == []
    assert rejected[0].line == 42
    assert rejected[0].reason == "no fx for date"


def test_usd_conversion_is_linear_in_fx(tx_file, fx):
    rows, _ = load_transactions(tx_file)
    non_stable = [r for r in rows if r.currency != "USDC"]
    base, _ = to_usd(non_stable, fx)
    scaled_fx = FxTable(quotes={k: 3.0 * v for k, v in fx.quotes.items()})
    scaled, _ = to_usd(non_stable, scaled_fx)
    for a, b in zip(base, scaled):
        assert b.usd_price == pytest.approx(3.0 * a.usd_price, rel=1e-12)


# ---------------------------------------------------------------------------
# prepare_dataset
# ---------------------------------------------------------------------------


def _transactions(prices, start=dt.date(2021, 1, 4)):
    from landmetrics.hedonic import Transaction

    out = []
    for i, p in enumerate(prices):
        day = start + dt.timedelta(days=i % 30)
        out.append(
            Transaction(
                timestamp=dt.datetime(day.year, day.month, day.day, 10),
                usd_price=float(p),
                num_plots=1,
                paid_in_weth=False,
                native_currency="ETH",
                native_price=float(p) / 2000.0,
            )
        )
    return out


def test_prepare_identity_when_no_outliers():
    txs = _transactions(np.linspace(100.0, 200.0, 50))
    ds = prepare_dataset(txs, winsor_lo=0.0, winsor_hi=1.0, metaverse="demo")
    assert [t.usd_price for t in ds.transactions] == [t.usd_price for t in txs]
    assert ds.metaverse == "demo"
    assert ds.coverage == (dt.date(2021, 1, 4), dt.date(2021, 2, 2))


def test_prepare_clamps_planted_outlier():
    prices = np.concatenate([np.linspace(100.0, 200.0, 99), [1e9]])
    txs = _transactions(prices)
    ds = prepare_dataset(txs, winsor_lo=0.001, winsor_hi=0.999)
    expected = winsorize_oracle(prices.tolist(), 0.001, 0.999)
    got = [t.usd_price for t in ds.transactions]
    assert got == pytest.approx(expected, rel=1e-12)
    assert max(got) < 1e6
    assert len(ds.transactions) == 100  # clamped, never dropped


def test_prepare_is_fixed_point():
    rng = np.random.default_rng(44)
    txs = _transactions(rng.lognormal(5.0, 1.0, size=200))
    once = prepare_dataset(txs, metaverse="m")
    twice = prepare_dataset(once.transactions, metaverse="m")
    assert [t.usd_price for t in once.transactions] == [
        t.usd_price for t in twice.transactions
    ]


def test_prepare_needs_ten_transactions():
    with pytest.raises(InsufficientDataError):
        prepare_dataset(_transactions([100.0] * 9))


def test_dataset_summary_matches_stats():
    txs = _transactions([100.0, 150.0, 200.0, 130.0] * 5)
    ds = prepare_dataset(txs, winsor_lo=0.0, winsor_hi=1.0)
    s = ds.summary()
    direct = summary_stats([t.usd_price for t in ds.transactions])
    assert s["n"] == 20
    assert s["usd_price"].mean == direct.mean
    assert s["usd_price"].p95 == direct.p95
    assert s["pct_weth"] == 0.0
    assert s["num_plots"].max == 1.0


def test_rejections_csv(tmp_path, tx_file):
    _, rejected = load_transactions(tx_file)
    p = tmp_path / "rej.csv"
    rejections_to_csv(rejected, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "line,reason"
    assert len(lines) == 8
    assert lines[1] == "5,bad timestamp"
