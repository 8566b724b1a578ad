"""VAR(p) estimation and Granger-causality block F tests.

Equation-by-equation OLS: each variable is regressed on a constant and p
lags of every panel variable.  The Granger test of ``cause -> effect``
compares the effect's equation with and without the cause's p lags via
the nested F test, with q = p restrictions.

Sample-size convention: a panel with ``rows`` aligned observations fit at
lag order p has regression sample ``n_obs = rows - p`` and per-equation
``df_resid = n_obs - (k*p + 1)`` where k is the panel width.  Adding one
lag therefore costs exactly one observation.

"Extended" tests include every other panel column as an endogenous VAR
variable; there is no exogenous-regressor mode.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .bubbles import AdfSpec, AdfResult, adf_stat, _adf_fit_stat
from .errors import (
    InsufficientDataError,
    SingularDesignError,
    ValidationError,
)
from .linreg import DesignMatrix, FTestResult, nested_f_test, ols_fit
from .series import TimeSeries, _fmt


@dataclass(frozen=True)
class Panel:
    """Aligned multivariate observations (time by variable), no missing cells.

    ``dates`` is optional metadata; when present it must be contiguous on
    the frequency grid, because lag construction assumes adjacent rows
    are adjacent periods.
    """

    variable_names: tuple[str, ...]
    data: np.ndarray = field(repr=False)
    freq: str = "weekly"
    dates: tuple[dt.date, ...] | None = None

    def __post_init__(self):
        names = tuple(self.variable_names)
        x = np.asarray(self.data, dtype=np.float64)
        if x.ndim != 2:
            raise ValidationError("panel data must be two-dimensional")
        if x.shape[1] != len(names):
            raise ValidationError(f"{len(names)} names for {x.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValidationError("variable names must be unique")
        if not np.all(np.isfinite(x)):
            raise ValidationError("panel contains non-finite cells")
        if self.dates is not None:
            dates = tuple(self.dates)
            if len(dates) != x.shape[0]:
                raise ValidationError("dates length does not match rows")
            step = dt.timedelta(days=7 if self.freq == "weekly" else 1)
            for a, b in zip(dates, dates[1:]):
                if b - a != step:
                    raise ValidationError(
                        f"panel dates must be contiguous; gap between {a} and {b}"
                    )
            object.__setattr__(self, "dates", dates)
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "variable_names", names)
        object.__setattr__(self, "data", x)

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_vars(self) -> int:
        return self.data.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.variable_names.index(name)]

    def subset(self, names) -> "Panel":
        idx = [self.variable_names.index(n) for n in names]
        return Panel(
            variable_names=tuple(names),
            data=self.data[:, idx],
            freq=self.freq,
            dates=self.dates,
        )


def build_panel(series_list) -> Panel:
    """Align several series into a Panel on their exact common dates.

    All series must share the frequency and cover an identical contiguous
    date range; anything else (gaps, partial overlap) is a validation
    error, because silently intersecting ranges would hide data problems.
    """
    series_list = list(series_list)
    if len(series_list) < 2:
        raise ValidationError("a panel needs at least two series")
    freqs = {s.freq for s in series_list}
    if len(freqs) != 1:
        raise ValidationError(f"mixed frequencies: {sorted(freqs)}")
    ref = series_list[0]
    for s in series_list[1:]:
        if s.dates != ref.dates:
            missing = set(ref.dates) ^ set(s.dates)
            sample = ", ".join(d.isoformat() for d in sorted(missing)[:5])
            raise ValidationError(
                f"series {s.name!r} is not aligned with {ref.name!r} "
                f"({len(missing)} differing dates, e.g. {sample})"
            )
    step = ref.step
    for a, b in zip(ref.dates, ref.dates[1:]):
        if b - a != step:
            raise ValidationError(f"gap between {a} and {b}; fill or trim before the VAR")
    return Panel(
        variable_names=tuple(s.name for s in series_list),
        data=np.column_stack([s.values for s in series_list]),
        freq=ref.freq,
        dates=ref.dates,
    )


@dataclass(frozen=True)
class VarModel:
    p: int
    variable_names: tuple[str, ...]
    intercepts: np.ndarray
    lag_matrices: np.ndarray = field(repr=False)  # (p, k, k): A_i[row eq, col var]
    resid_cov: np.ndarray = field(repr=False)
    n_obs: int
    df_resid: int


@dataclass(frozen=True)
class GrangerResult:
    cause: str
    effect: str
    p: int
    f_stat: float
    p_value: float
    df_num: int
    df_den: int
    n_obs: int
    controls_included: bool


def _lagged_design(panel: Panel, p: int):
    """Materialize the VAR(p) design: constant plus p lags of every column.

    Returns (design, responses) where responses[:, j] is variable j over
    the regression sample (rows p..n-1).
    """
    if p < 1:
        raise ValidationError(f"lag order must be >= 1, got {p}")
    x = panel.data
    rows, k = x.shape
    n_obs = rows - p
    n_params = k * p + 1
    if n_obs - n_params < 5:
        raise InsufficientDataError(
            f"{rows} rows leave df_resid = {n_obs - n_params} < 5 at p={p}, k={k}"
        )
    labels = ["const"]
    cols = [np.ones(n_obs)]
    for lag in range(1, p + 1):
        for j, name in enumerate(panel.variable_names):
            labels.append(f"{name}_lag{lag}")
            cols.append(x[p - lag:rows - lag, j])
    design = DesignMatrix(tuple(labels), np.column_stack(cols))
    return design, x[p:]


def fit_var(panel: Panel, p: int) -> VarModel:
    """Fit a VAR(p) by equation-wise least squares."""
    design, resp = _lagged_design(panel, p)
    k = panel.n_vars
    n_obs = resp.shape[0]
    intercepts = np.empty(k)
    lag_matrices = np.empty((p, k, k))
    resid = np.empty((n_obs, k))
    df_resid = n_obs - (k * p + 1)
    for eq in range(k):
        fit = ols_fit(design, resp[:, eq])
        intercepts[eq] = fit.coefficients[0]
        for lag in range(1, p + 1):
            lo = 1 + (lag - 1) * k
            lag_matrices[lag - 1, eq, :] = fit.coefficients[lo:lo + k]
        resid[:, eq] = fit.residuals
    return VarModel(
        p=p,
        variable_names=panel.variable_names,
        intercepts=intercepts,
        lag_matrices=lag_matrices,
        resid_cov=(resid.T @ resid) / n_obs,
        n_obs=n_obs,
        df_resid=df_resid,
    )


def granger_test(
    panel: Panel, cause: str, effect: str, p: int, controls: bool = False
) -> GrangerResult:
    """Block F test that lags of ``cause`` add nothing to ``effect``.

    With ``controls=False`` the system is the bivariate VAR on
    (effect, cause).  With ``controls=True`` every panel column enters as
    an endogenous variable; the panel must then hold at least one column
    beyond the tested pair.
    """
    names = panel.variable_names
    if cause == effect:
        raise ValidationError("cause and effect must differ")
    for n in (cause, effect):
        if n not in names:
            raise ValidationError(f"variable {n!r} not in panel {names}")
    if controls:
        if panel.n_vars < 3:
            raise ValidationError(
                "controls=True needs control columns beyond the tested pair"
            )
        sub = panel
    else:
        sub = panel.subset([effect, cause])
    design, resp = _lagged_design(sub, p)
    y = resp[:, sub.variable_names.index(effect)]
    unrestricted = ols_fit(design, y)

    drop = {f"{cause}_lag{lag}" for lag in range(1, p + 1)}
    keep = [i for i, lbl in enumerate(design.column_labels) if lbl not in drop]
    restricted_design = DesignMatrix(
        tuple(design.column_labels[i] for i in keep), design.data[:, keep]
    )
    restricted = ols_fit(restricted_design, y)
    ftest: FTestResult = nested_f_test(restricted, unrestricted, q=p)
    return GrangerResult(
        cause=cause,
        effect=effect,
        p=p,
        f_stat=ftest.f_stat,
        p_value=ftest.p_value,
        df_num=ftest.df_num,
        df_den=ftest.df_den,
        n_obs=y.shape[0],
        controls_included=controls,
    )


def granger_table(
    panel: Panel, cause: str, effect: str, p_max: int, both_specs: bool = True
) -> list[GrangerResult]:
    """All (spec, lag, direction) cells, baseline first, then extended."""
    if p_max < 1:
        raise ValidationError(f"p_max must be >= 1, got {p_max}")
    specs = [False, True] if both_specs else [False]
    out = []
    for controls in specs:
        for p in range(1, p_max + 1):
            out.append(granger_test(panel, cause, effect, p, controls))
            out.append(granger_test(panel, effect, cause, p, controls))
    return out


def granger_table_to_csv(results, path) -> None:
    """``lag,controls,direction,f_stat,p_value,df_num,df_den,n_obs`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "controls", "direction", "f_stat", "p_value",
                    "df_num", "df_den", "n_obs"])
        for r in results:
            w.writerow([
                r.p,
                int(r.controls_included),
                f"{r.cause}->{r.effect}",
                _fmt(r.f_stat),
                _fmt(r.p_value),
                r.df_num,
                r.df_den,
                r.n_obs,
            ])


@dataclass(frozen=True)
class StationarityCheck:
    """ADF outcome for one panel column against a left-tail null quantile.

    ``passes`` is True when the unit root is rejected (stat below the
    critical value), i.e. the column looks stationary enough for the VAR.
    Columns whose regression degenerates carry ``error`` instead.
    """

    name: str
    result: AdfResult | None
    critical_value: float
    passes: bool
    error: str | None = None


def _adf_null_quantile(
    n: int, spec: AdfSpec, alpha: float, n_rep: int, seed: int
) -> float:
    stats = np.empty(n_rep)
    for rep in range(n_rep):
        rng = Generator(Philox(key=[seed, rep]))
        y = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n - 1))])
        stats[rep], _ = _adf_fit_stat(y, spec.n_lags)
    return float(np.quantile(stats, alpha))


def stationarity_precheck(
    panel: Panel,
    spec: AdfSpec = AdfSpec(),
    alpha: float = 0.05,
    n_rep: int = 1000,
    seed: int = 0,
) -> list[StationarityCheck]:
    """Full-sample ADF on each column versus a simulated 5% critical value.

    The critical value is the ``alpha`` quantile of the full-sample ADF
    statistic over ``n_rep`` simulated driftless unit-root paths of the
    same length (left tail: more negative means stronger rejection).
    """
    if panel.n_rows < 20:
        raise InsufficientDataError(f"precheck needs >= 20 rows, got {panel.n_rows}")
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    cv = _adf_null_quantile(panel.n_rows, spec, alpha, n_rep, seed)
    out = []
    for name in panel.variable_names:
        try:
            res = adf_stat(panel.column(name), spec)
        except (SingularDesignError, InsufficientDataError) as exc:
            out.append(StationarityCheck(name=name, result=None,
                                         critical_value=cv, passes=False,
                                         error=str(exc)))
            continue
        out.append(StationarityCheck(name=name, result=res, critical_value=cv,
                                     passes=bool(res.stat < cv)))
    return out
