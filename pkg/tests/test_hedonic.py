"""Hedonic price-index construction tests."""

import datetime as dt
import json
import math

import numpy as np
import pytest

from landmetrics.errors import (
    InsufficientDataError,
    SingularDesignError,
    ValidationError,
)
from landmetrics.hedonic import (
    Transaction,
    bucket_periods,
    build_hpi,
    hedonic_fit_to_json,
    hpi_points_to_csv,
    hpi_to_series,
)

from oracles import hedonic_refit_oracle, monday_of

D0 = dt.date(2021, 1, 4)  # a Monday


def tx(day, usd, plots=1, weth=False, hour=12):
    ts = dt.datetime(day.year, day.month, day.day, hour)
    return Transaction(
        timestamp=ts,
        usd_price=float(usd),
        num_plots=int(plots),
        paid_in_weth=weth,
        native_currency="WETH" if weth else "ETH",
        native_price=float(usd) / 2000.0,
    )


def week(i):
    return D0 + dt.timedelta(weeks=i)


_oracle_refit = hedonic_refit_oracle


# ---------------------------------------------------------------------------
# Transaction validation
# ---------------------------------------------------------------------------


def test_transaction_validation():
    with pytest.raises(ValidationError, match="usd_price"):
        tx(D0, -5.0)
    with pytest.raises(ValidationError, match="num_plots"):
        tx(D0, 10.0, plots=0)
    with pytest.raises(ValidationError, match="inconsistent"):
        Transaction(
            timestamp=dt.datetime(2021, 1, 4, 9),
            usd_price=10.0,
            num_plots=1,
            paid_in_weth=True,
            native_currency="ETH",
            native_price=0.005,
        )
    t = tx(D0, 10.0)
    assert t.date == D0


# ---------------------------------------------------------------------------
# period bucketing
# ---------------------------------------------------------------------------


def test_same_day_transactions_share_a_bucket():
    txs = [tx(D0, 10.0 + i) for i in range(3)]
    buckets = bucket_periods(txs, freq="weekly")
    assert list(buckets) == [D0]
    assert len(buckets[D0]) == 3


def test_consecutive_mondays_get_distinct_buckets():
    txs = [tx(week(0), 10.0), tx(week(1), 11.0)]
    buckets = bucket_periods(txs, freq="weekly")
    assert list(buckets) == [week(0), week(1)]


def test_weekly_buckets_match_calendar_oracle():
    rng = np.random.default_rng(20)
    txs = [
        tx(D0 + dt.timedelta(days=int(d)), 10.0 + i)
        for i, d in enumerate(rng.integers(0, 120, size=100))
    ]
    buckets = bucket_periods(txs, freq="weekly")
    for p, members in buckets.items():
        assert p.weekday() == 0
        for m in members:
            assert monday_of(m.date) == p
    assert sum(len(v) for v in buckets.values()) == 100
    assert list(buckets) == sorted(buckets)


def test_daily_buckets_are_dates():
    txs = [tx(D0, 10.0), tx(D0 + dt.timedelta(days=1), 11.0)]
    buckets = bucket_periods(txs, freq="daily")
    assert list(buckets) == [D0, D0 + dt.timedelta(days=1)]
    with pytest.raises(ValidationError):
        bucket_periods(txs, freq="monthly")


# ---------------------------------------------------------------------------
# build_hpi
# ---------------------------------------------------------------------------


def test_noiseless_doubling_recovers_exact_index():
    txs = [tx(week(0), p) for p in (100.0, 200.0, 400.0)]
    txs += [tx(week(1), 2.0 * p) for p in (100.0, 200.0, 400.0)]
    points, fit = build_hpi(txs)
    assert [p.period for p in points] == [week(0), week(1)]
    assert points[0].index == 1.0
    assert points[0].delta == 0.0
    assert points[0].delta_se is None
    assert points[1].index == pytest.approx(2.0, abs=1e-10)
    assert points[1].delta == pytest.approx(math.log(2.0), abs=1e-12)
    assert fit.beta_log_plots is None
    assert fit.beta_weth is None
    assert fit.n_obs == 6
    assert fit.base_period == week(0)


def test_single_period_is_insufficient():
    txs = [tx(week(0), 10.0 + i) for i in range(5)]
    with pytest.raises(InsufficientDataError):
        build_hpi(txs)


def test_coefficients_match_materialized_dummy_oracle():
    rng = np.random.default_rng(31)
    deltas = [0.0, 0.3, -0.2]
    txs = []
    for w, d in enumerate(deltas):
        for j in range(6):
            plots = int(rng.integers(1, 9))
            weth = bool(rng.integers(0, 2))
            z = rng.normal()
            usd = math.exp(math.log(500.0) + d + 0.9 * math.log(plots)
                           - 0.1 * weth + 0.05 * z)
            txs.append(tx(week(w), usd, plots=plots, weth=weth))
    points, fit = build_hpi(txs)
    periods, beta, se, rss = _oracle_refit(txs)

    assert [p.period for p in points] == periods
    # oracle layout: [const, dummy_1, dummy_2, log_plots, weth]
    for i, p in enumerate(points[1:], start=1):
        assert p.delta == pytest.approx(beta[i], abs=1e-9)
        assert p.index == pytest.approx(math.exp(beta[i]), rel=1e-9)
        assert p.delta_se == pytest.approx(se[i], abs=1e-9)
    assert fit.beta_log_plots == pytest.approx(beta[3], abs=1e-9)
    assert fit.beta_weth == pytest.approx(beta[4], abs=1e-9)
    assert fit.se_log_plots == pytest.approx(se[3], abs=1e-9)
    assert fit.se_weth == pytest.approx(se[4], abs=1e-9)
    assert fit.rss == pytest.approx(rss, abs=1e-9)
    assert fit.df_resid == 18 - 5


def test_planted_coefficients_recovered_without_noise():
    rng = np.random.default_rng(8)
    deltas = [0.0, 0.25, -0.4]
    txs = []
    for w, d in enumerate(deltas):
        for _ in range(5):
            plots = int(rng.integers(1, 6))
            weth = bool(rng.integers(0, 2))
            usd = math.exp(math.log(300.0) + d + 0.9 * math.log(plots) - 0.1 * weth)
            txs.append(tx(week(w), usd, plots=plots, weth=weth))
    points, fit = build_hpi(txs)
    for p, d in zip(points, deltas):
        assert p.index == pytest.approx(math.exp(d), abs=1e-10)
    assert fit.beta_log_plots == pytest.approx(0.9, abs=1e-10)
    assert fit.beta_weth == pytest.approx(-0.1, abs=1e-10)


def test_currency_unit_invariance():
    rng = np.random.default_rng(40)
    txs, scaled = [], []
    for w in range(3):
        for _ in range(4):
            usd = float(rng.lognormal(6.0, 0.4))
            plots = int(rng.integers(1, 5))
            txs.append(tx(week(w), usd, plots=plots))
            scaled.append(tx(week(w), usd * 1000.0, plots=plots))
    base_points, _ = build_hpi(txs)
    scaled_points, _ = build_hpi(scaled)
    for a, b in zip(base_points, scaled_points):
        assert b.index == pytest.approx(a.index, abs=1e-10)
        assert b.delta == pytest.approx(a.delta, abs=1e-10)


def test_reduces_to_geometric_means_with_identical_composition():
    # same plot counts and settlement pattern in every period, so both
    # controls are dropped and the index is the ratio of per-period
    # geometric means
    rng = np.random.default_rng(3)
    txs = []
    levels = {}
    for w, scale in enumerate((1.0, 1.7, 0.8)):
        prices = scale * rng.lognormal(5.0, 0.3, size=5)
        levels[w] = prices
        txs += [tx(week(w), p) for p in prices]
    points, fit = build_hpi(txs)
    gm = {w: math.exp(np.mean(np.log(v))) for w, v in levels.items()}
    for w, p in enumerate(points):
        assert p.index == pytest.approx(gm[w] / gm[0], rel=1e-9)
    assert fit.beta_log_plots is None
    assert fit.beta_weth is None


def test_plot_count_control_absorbs_composition_shift():
    # week 1 sells the same stock at the same per-plot pricing but in
    # double-sized parcels; the control keeps the quality-adjusted index
    # flat instead of doubling
    rng = np.random.default_rng(9)
    base_prices = rng.lognormal(5.0, 0.2, size=6)
    txs = [tx(week(0), p, plots=1) for p in base_prices]
    txs += [tx(week(0), 2.0 * p, plots=2) for p in base_prices]
    txs += [tx(week(1), 2.0 * p, plots=2) for p in base_prices]
    txs += [tx(week(1), p, plots=1) for p in base_prices]
    points, fit = build_hpi(txs)
    assert points[1].index == pytest.approx(1.0, abs=1e-9)
    assert fit.beta_log_plots == pytest.approx(1.0, abs=1e-9)

    # without plot variation in the data the same prices would read as a
    # price move; verify against the materialized oracle refit
    periods, beta, se, _ = _oracle_refit(txs)
    assert points[1].delta == pytest.approx(beta[1], abs=1e-10)


def test_sparse_period_becomes_gap():
    txs = [tx(week(0), 100.0 + i) for i in range(4)]
    txs += [tx(week(1), 150.0), tx(week(1), 160.0)]  # below min_per_period
    txs += [tx(week(2), 120.0 + i) for i in range(3)]
    points, fit = build_hpi(txs, min_per_period=3)
    assert [p.period for p in points] == [week(0), week(2)]
    assert fit.gap_periods == (week(1),)
    assert fit.n_obs == 7  # the two gap transactions never enter the fit


def test_min_per_period_one_keeps_everything():
    txs = [tx(week(0), 100.0), tx(week(1), 110.0), tx(week(2), 121.0)]
    points, fit = build_hpi(txs, min_per_period=1)
    assert len(points) == 3
    assert fit.gap_periods == ()
    assert fit.df_resid == 0
    assert points[1].delta_se is None


def test_collinear_control_raises_singular():
    # wETH settlement coincides exactly with the week-1 dummy
    txs = [tx(week(0), 100.0 + i) for i in range(4)]
    txs += [tx(week(1), 150.0 + i, weth=True) for i in range(4)]
    with pytest.raises(SingularDesignError) as exc:
        build_hpi(txs)
    assert "weth_flag" in str(exc.value)


def test_build_hpi_validation():
    with pytest.raises(ValidationError):
        build_hpi([tx(week(0), 10.0)], min_per_period=0)
    with pytest.raises(ValidationError):
        build_hpi([])


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def _three_week_panel():
    rng = np.random.default_rng(12)
    txs = []
    for w in range(4):
        if w == 2:
            txs.append(tx(week(w), 123.0))  # gap week
            continue
        for _ in range(4):
            txs.append(tx(week(w), float(rng.lognormal(5.0, 0.3))))
    return build_hpi(txs)


def test_hpi_to_series_skips_gap_weeks():
    points, fit = _three_week_panel()
    s = hpi_to_series(points)
    assert s.freq == "weekly"
    assert s.dates == (week(0), week(1), week(3))
    assert s.values[0] == 1.0
    assert fit.gap_periods == (week(2),)
    with pytest.raises(ValidationError):
        hpi_to_series([])


def test_hpi_csv_schema(tmp_path):
    points, _ = _three_week_panel()
    p = tmp_path / "hpi.csv"
    hpi_points_to_csv(points, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "period,index,delta,n_transactions"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == week(0).isoformat()
    assert float(first[1]) == 1.0
    assert float(first[2]) == 0.0
    assert first[3] == "4"


def test_hedonic_fit_json_roundtrip(tmp_path):
    points, fit = _three_week_panel()
    p = tmp_path / "fit.json"
    hedonic_fit_to_json(fit, p)
    data = json.loads(p.read_text())
    assert data["base_period"] == week(0).isoformat()
    assert data["n_obs"] == fit.n_obs
    assert data["gap_periods"] == [week(2).isoformat()]
    assert data["beta_log_plots"] is None
    assert data["beta_weth"] is None
