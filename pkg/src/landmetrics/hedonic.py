"""Hedonic price index from USD-denominated land transactions.

The index is the exponentiated period fixed effect from one pooled
regression of log price on period dummies plus two attribute controls:

    ln(usd_price) = a + delta_period + b1 * ln(num_plots) + b2 * weth + e

The first estimable period is the base: its delta is identically 0 and
its index exactly 1.  Periods with fewer than ``min_per_period``
transactions are not estimated; they are reported as gaps and the
index series simply omits those dates.

A control column that does not vary in the estimation sample (all
single-plot sales, or no wETH sales at all) carries no information and
is dropped from the design; its coefficient is reported as ``None``.
Genuine collinearity between a period dummy and a control still raises
a singular-design error naming the columns involved.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .linreg import DesignMatrix, ols_fit
from .series import TimeSeries, _fmt


@dataclass(frozen=True)
class Transaction:
    """One land sale, in USD terms, with its native-settlement facts."""

    timestamp: dt.datetime
    usd_price: float
    num_plots: int
    paid_in_weth: bool
    native_currency: str
    native_price: float

    def __post_init__(self):
        if not isinstance(self.timestamp, dt.datetime):
            raise ValidationError("timestamp must be a datetime")
        if not (self.usd_price > 0.0) or not math.isfinite(self.usd_price):
            raise ValidationError(f"usd_price must be > 0, got {self.usd_price!r}")
        if not isinstance(self.num_plots, int) or self.num_plots < 1:
            raise ValidationError(f"num_plots must be an integer >= 1, got {self.num_plots!r}")
        if not (self.native_price > 0.0) or not math.isfinite(self.native_price):
            raise ValidationError(f"native_price must be > 0, got {self.native_price!r}")
        if not self.native_currency:
            raise ValidationError("native_currency must be non-empty")
        if self.paid_in_weth != (self.native_currency.upper() == "WETH"):
            raise ValidationError(
                f"paid_in_weth={self.paid_in_weth} inconsistent with currency "
                f"{self.native_currency!r}"
            )

    @property
    def date(self) -> dt.date:
        return self.timestamp.date()


@dataclass(frozen=True)
class HpiPoint:
    """Index level of one period; base period has delta 0 and index 1."""

    period: dt.date
    index: float
    delta: float
    delta_se: float | None
    n_transactions: int


@dataclass(frozen=True)
class HedonicFit:
    """Pooled-regression metadata accompanying the index points.

    Control coefficients are ``None`` when the corresponding column had
    no variation and was dropped.
    """

    beta_log_plots: float | None
    se_log_plots: float | None
    beta_weth: float | None
    se_weth: float | None
    n_obs: int
    rss: float
    df_resid: int
    base_period: dt.date
    gap_periods: tuple[dt.date, ...]

    def to_json_dict(self) -> dict:
        return {
            "base_period": self.base_period.isoformat(),
            "beta_log_plots": self.beta_log_plots,
            "se_log_plots": self.se_log_plots,
            "beta_weth": self.beta_weth,
            "se_weth": self.se_weth,
            "n_obs": self.n_obs,
            "rss": self.rss,
            "df_resid": self.df_resid,
            "gap_periods": [d.isoformat() for d in self.gap_periods],
        }


def period_of(d: dt.date, freq: str) -> dt.date:
    """Period label of a date: the Monday of its ISO week, or the day itself."""
    if freq == "weekly":
        iso = d.isocalendar()
        return dt.date.fromisocalendar(iso[0], iso[1], 1)
    if freq == "daily":
        return d
    raise ValidationError(f"freq must be 'weekly' or 'daily', got {freq!r}")


def bucket_periods(transactions, freq: str = "weekly") -> dict[dt.date, list[Transaction]]:
    """Group transactions into sorted calendar periods.

    Weekly periods are ISO weeks, Monday through Sunday, labeled by their
    Monday.  Every transaction lands in exactly one bucket.
    """
    txs = list(transactions)
    if not txs:
        raise ValidationError("bucket_periods needs at least one transaction")
    buckets: dict[dt.date, list[Transaction]] = {}
    for tx in txs:
        buckets.setdefault(period_of(tx.date, freq), []).append(tx)
    return {p: buckets[p] for p in sorted(buckets)}


def build_hpi(
    transactions,
    freq: str = "weekly",
    min_per_period: int = 3,
) -> tuple[list[HpiPoint], HedonicFit]:
    """Estimate the hedonic index over all estimable periods.

    Returns one :class:`HpiPoint` per estimable period (in order) and the
    :class:`HedonicFit` with the pooled control coefficients.  Periods
    with fewer than ``min_per_period`` transactions are gaps: their
    transactions do not enter the regression and no point is emitted for
    them.
    """
    if min_per_period < 1:
        raise ValidationError(f"min_per_period must be >= 1, got {min_per_period}")
    buckets = bucket_periods(transactions, freq)
    periods = [p for p, txs in buckets.items() if len(txs) >= min_per_period]
    gaps = tuple(p for p in buckets if p not in set(periods))
    if len(periods) < 2:
        raise InsufficientDataError(
            f"need at least 2 periods with >= {min_per_period} transactions, "
            f"found {len(periods)}"
        )
    base = periods[0]
    sample = [(p, tx) for p in periods for tx in buckets[p]]
    n = len(sample)

    log_price = np.array([math.log(tx.usd_price) for _, tx in sample])
    log_plots = np.array([math.log(tx.num_plots) for _, tx in sample])
    weth = np.array([1.0 if tx.paid_in_weth else 0.0 for _, tx in sample])

    labels = ["const"]
    cols = [np.ones(n)]
    for p in periods[1:]:
        labels.append(f"period_{p.isoformat()}")
        cols.append(np.array([1.0 if q == p else 0.0 for q, _ in sample]))
    has_plots = bool(np.ptp(log_plots) > 0.0)
    has_weth = bool(np.ptp(weth) > 0.0)
    if has_plots:
        labels.append("log_num_plots")
        cols.append(log_plots)
    if has_weth:
        labels.append("weth_flag")
        cols.append(weth)

    design = DesignMatrix(tuple(labels), np.column_stack(cols))
    fit = ols_fit(design, log_price)

    points = [
        HpiPoint(period=base, index=1.0, delta=0.0, delta_se=None,
                 n_transactions=len(buckets[base]))
    ]
    for p in periods[1:]:
        lbl = f"period_{p.isoformat()}"
        delta = fit.coefficient(lbl)
        se = fit.std_error(lbl) if fit.std_errors is not None else None
        points.append(
            HpiPoint(
                period=p,
                index=math.exp(delta),
                delta=delta,
                delta_se=se,
                n_transactions=len(buckets[p]),
            )
        )
    meta = HedonicFit(
        beta_log_plots=fit.coefficient("log_num_plots") if has_plots else None,
        se_log_plots=(fit.std_error("log_num_plots")
                      if has_plots and fit.std_errors is not None else None),
        beta_weth=fit.coefficient("weth_flag") if has_weth else None,
        se_weth=(fit.std_error("weth_flag")
                 if has_weth and fit.std_errors is not None else None),
        n_obs=n,
        rss=fit.rss,
        df_resid=fit.df_resid,
        base_period=base,
        gap_periods=gaps,
    )
    return points, meta


def hpi_to_series(points, name: str = "hpi", freq: str = "weekly") -> TimeSeries:
    """Index levels as a TimeSeries; gap periods are simply absent dates."""
    pts = list(points)
    if not pts:
        raise ValidationError("hpi_to_series needs at least one point")
    dates = tuple(p.period for p in pts)
    values = np.array([p.index for p in pts])
    return TimeSeries(name=name, freq=freq, dates=dates, values=values)


def hpi_points_to_csv(points, path) -> None:
    """Write the index in the ``period,index,delta,n_transactions`` schema."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "index", "delta", "n_transactions"])
        for p in points:
            w.writerow([p.period.isoformat(), _fmt(p.index), _fmt(p.delta), p.n_transactions])


def hedonic_fit_to_json(fitmeta: HedonicFit, path) -> None:
    with open(path, "w") as fh:
        json.dump(fitmeta.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
