"""Explosive-episode detection: recursive ADF statistics and date-stamping.

The statistic at date t is the backward supremum ADF (BSADF): the largest
ADF t-ratio over all windows [s1, t] with s1 ranging from 0 back to
t - r0, where r0 is the minimum window setting.  A date is stamped as
explosive when its BSADF exceeds a finite-sample critical value obtained
by Monte-Carlo simulation of driftless unit-root paths of the same length.

The ADF regression is the constant-included specification

    dy[t] = a + b*y[t-1] + c1*dy[t-1] + ... + ck*dy[t-k] + e[t]

and the statistic is the t-ratio b_hat / se(b_hat).  Right-tail
exceedance indicates explosive behaviour.

Two engines compute the window sweep:

:``naive``
    one OLS per window through :mod:`landmetrics.linreg`.  Slow and
    definitional; this path is the correctness reference.
:``fast``
    all windows at once from prefix sums of globally centered
    cross-products, solved per window in closed form (k = 1) or by a
    batched solve.  Agrees with ``naive`` to ~1e-13 on the t-ratio and is
    what makes the Monte-Carlo critical values affordable.

:param engine: every sweep entry point accepts ``engine="fast"`` (default)
    or ``engine="naive"`` to force the reference path.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from .errors import (
    InsufficientDataError,
    NoValidWindowError,
    SingularDesignError,
    ValidationError,
)
from .linreg import DesignMatrix, ols_fit
from .series import TimeSeries, _fmt

_ENGINES = ("fast", "naive")

#: windows whose residual sum of squares falls below this relative floor
#: are treated as degenerate (an exact fit has no usable t-ratio)
_RSS_RTOL = 1e-12


def default_min_window(n: int) -> int:
    """Rule-of-thumb minimum window, ceil(T * (0.01 + 1.8/sqrt(T))).

    This is the Phillips-Shi-Yu recommendation used throughout the
    multiple-bubble dating literature.  Override it by passing ``r0``
    explicitly wherever a sweep is run.
    """
    if n < 2:
        raise ValidationError(f"series length must be >= 2, got {n}")
    return math.ceil(n * (0.01 + 1.8 / math.sqrt(n)))


@dataclass(frozen=True)
class AdfSpec:
    """ADF regression settings.

    :param n_lags: number of lagged differences k (>= 0).  With
        ``lag_selection="bic"`` this is the largest candidate.
    :param lag_selection: ``"fixed"`` uses exactly ``n_lags``; ``"bic"``
        picks k in [0, n_lags] per window by the Bayesian information
        criterion (candidates compared on the common sample implied by
        the largest k, winner refit on its own full sample).
    """

    n_lags: int = 1
    lag_selection: str = "fixed"

    def __post_init__(self):
        if self.n_lags < 0:
            raise ValidationError(f"n_lags must be >= 0, got {self.n_lags}")
        if self.lag_selection not in ("fixed", "bic"):
            raise ValidationError(f"unknown lag_selection {self.lag_selection!r}")


@dataclass(frozen=True)
class AdfResult:
    stat: float
    window_start: int
    window_end: int
    n_obs_used: int
    n_lags_used: int


@dataclass(frozen=True)
class BsadfPoint:
    t_index: int
    stat: float
    argmax_start: int


@dataclass(frozen=True)
class CvTable:
    """Per-date Monte-Carlo critical values.

    ``cv_by_t[i, j]`` is the alpha[j] empirical quantile of the null
    BSADF distribution at t = r0 + i.  Deterministic in
    (T, r0, n_lags, n_rep, seed).
    """

    series_length: int
    min_window: int
    alphas: tuple[float, ...]
    cv_by_t: np.ndarray = field(repr=False)
    n_rep: int
    seed: int
    n_lags: int

    def __post_init__(self):
        cv = np.asarray(self.cv_by_t, dtype=np.float64)
        n_pts = self.series_length - self.min_window
        if cv.shape != (n_pts, len(self.alphas)):
            raise ValidationError(
                f"cv_by_t shape {cv.shape} != ({n_pts}, {len(self.alphas)})"
            )
        if np.any(np.diff(cv, axis=1) < 0.0):
            raise ValidationError("critical values must be nondecreasing in alpha")
        cv.flags.writeable = False
        object.__setattr__(self, "cv_by_t", cv)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    def level_column(self, level: float) -> np.ndarray:
        for j, a in enumerate(self.alphas):
            if abs(a - level) < 1e-9:
                return self.cv_by_t[:, j]
        raise ValidationError(f"level {level} not among table alphas {self.alphas}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# T={self.series_length} r0={self.min_window} "
                f"n_rep={self.n_rep} seed={self.seed} n_lags={self.n_lags}\n"
            )
            w = csv.writer(fh)
            w.writerow(["t"] + [f"cv_{a:g}" for a in self.alphas])
            for i in range(self.cv_by_t.shape[0]):
                w.writerow([self.min_window + i] + [_fmt(v) for v in self.cv_by_t[i]])

    @classmethod
    def from_csv(cls, path) -> "CvTable":
        meta = {}
        with open(path, newline="") as fh:
            first = fh.readline()
            if first.startswith("#"):
                for tok in first[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = int(v)
            else:
                fh.seek(0)
            r = csv.reader(fh)
            header = next(r)
            alphas = tuple(float(h[3:]) for h in header[1:])
            ts, rows = [], []
            for row in r:
                if not row:
                    continue
                ts.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
        r0 = ts[0]
        return cls(
            series_length=meta.get("T", ts[-1] + 1),
            min_window=meta.get("r0", r0),
            alphas=alphas,
            cv_by_t=np.array(rows),
            n_rep=meta.get("n_rep", 0),
            seed=meta.get("seed", 0),
            n_lags=meta.get("n_lags", 1),
        )


@dataclass(frozen=True)
class BubbleEpisode:
    start: dt.date
    end: dt.date
    peak_stat: float


@dataclass(frozen=True)
class DatestampResult:
    """Flag per evaluable date plus the maximal flagged runs."""

    level: float
    dates: tuple[dt.date, ...]
    stats: np.ndarray = field(repr=False)
    cvs: np.ndarray = field(repr=False)
    flags: np.ndarray = field(repr=False)
    episodes: tuple[BubbleEpisode, ...]
    pct_flagged: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "stat", "cv", "flag"])
            for d, s, c, f in zip(self.dates, self.stats, self.cvs, self.flags):
                w.writerow([d.isoformat(), _fmt(s), _fmt(c), int(f)])

    def episodes_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["start", "end", "peak_stat"])
            for e in self.episodes:
                w.writerow([e.start.isoformat(), e.end.isoformat(), _fmt(e.peak_stat)])


# ---------------------------------------------------------------------------
# single-window ADF (reference path)
# ---------------------------------------------------------------------------


def _as_values(window) -> np.ndarray:
    if isinstance(window, TimeSeries):
        return window.values
    return np.asarray(window, dtype=np.float64)


def _adf_design(y: np.ndarray, k: int, rows_from: int):
    """Design and response for the ADF regression with k diff lags.

    Rows are t = rows_from .. len(y)-1 in window coordinates; the caller
    guarantees rows_from >= k + 1.
    """
    dy = np.diff(y)
    n = y.shape[0] - rows_from
    cols = [np.ones(n), y[rows_from - 1:-1]]
    labels = ["const", "y_lag1"]
    for i in range(1, k + 1):
        cols.append(dy[rows_from - 1 - i:y.shape[0] - 1 - i])
        labels.append(f"dy_lag{i}")
    return DesignMatrix(tuple(labels), np.column_stack(cols)), dy[rows_from - 1:]


def _adf_fit_stat(y: np.ndarray, k: int) -> tuple[float, int]:
    design, resp = _adf_design(y, k, k + 1)
    fit = ols_fit(design, resp)
    scale = float(resp @ resp)
    if fit.rss <= _RSS_RTOL * max(scale, 1.0):
        raise SingularDesignError("residual variance is zero in ADF window")
    return float(fit.coefficient("y_lag1") / fit.std_error("y_lag1")), resp.shape[0]


def adf_stat(window, spec: AdfSpec = AdfSpec()) -> AdfResult:
    """ADF t-ratio on one window (a TimeSeries or a 1-d array of values).

    :param window: the observations; length must be at least
        ``2 * n_lags + 4`` so the regression has a residual degree of
        freedom, and at least ``n_lags + 5``.
    :param spec: regression settings; see :class:`AdfSpec`.
    :returns: :class:`AdfResult` with window indices in window coordinates
        (0 .. len-1).
    """
    y = _as_values(window)
    if y.ndim != 1:
        raise ValidationError("adf_stat expects a one-dimensional window")
    if not np.all(np.isfinite(y)):
        raise ValidationError("adf_stat requires finite values")
    L = y.shape[0]
    kmax = spec.n_lags
    min_len = max(2 * kmax + 4, kmax + 5)
    if L < min_len:
        raise InsufficientDataError(
            f"window length {L} < {min_len} required for n_lags={kmax}"
        )
    if spec.lag_selection == "fixed":
        stat, n_used = _adf_fit_stat(y, kmax)
        k_used = kmax
    else:
        k_used = _bic_select(y, kmax)
        stat, n_used = _adf_fit_stat(y, k_used)
    return AdfResult(
        stat=stat,
        window_start=0,
        window_end=L - 1,
        n_obs_used=n_used,
        n_lags_used=k_used,
    )


def _bic_select(y: np.ndarray, kmax: int) -> int:
    """Smallest-BIC lag count in [0, kmax], compared on the common sample."""
    best_k, best_bic = 0, np.inf
    for k in range(kmax + 1):
        design, resp = _adf_design(y, k, kmax + 1)
        try:
            fit = ols_fit(design, resp)
        except SingularDesignError:
            continue
        n = resp.shape[0]
        if fit.rss <= 0.0:
            return k
        bic = n * math.log(fit.rss / n) + (k + 2) * math.log(n)
        if bic < best_bic - 1e-12:
            best_k, best_bic = k, bic
    if best_bic is np.inf:
        raise SingularDesignError("no lag candidate produced a nonsingular ADF design")
    return best_k


# ---------------------------------------------------------------------------
# fast engine: all windows from prefix sums
# ---------------------------------------------------------------------------


class _WindowPlan:
    """Precomputed window enumeration for a (T, r0, k) sweep.

    Shared across Monte-Carlo replications so the index arithmetic is done
    once.  For each r2 in [r0, T-1] the admissible starts are
    s1 in {0, ..., r2 - r0}; a window [s1, r2] uses regression rows
    t in [s1 + k + 1, r2], i.e. prefix-slot range (s1, r2 - k].
    """

    def __init__(self, T: int, r0: int, k: int):
        if r0 < k + 5:
            raise ValidationError(f"r0={r0} must be >= n_lags + 5 = {k + 5}")
        if T <= r0:
            raise InsufficientDataError(f"series length {T} must exceed r0={r0}")
        self.T, self.r0, self.k = T, r0, k
        r2s = np.arange(r0, T)
        counts = r2s - r0 + 1
        self.r2s = r2s
        self.counts = counts
        self.R2 = np.repeat(r2s, counts)
        self.S1 = np.concatenate([np.arange(c) for c in counts])
        self.lo = self.S1
        self.hi = self.R2 - k
        self.n = (self.hi - self.lo).astype(np.float64)
        self.seg_starts = np.concatenate([[0], np.cumsum(counts)[:-1]])


def _bsadf_fast(y: np.ndarray, plan: _WindowPlan):
    """BSADF sequence via centered prefix sums.

    Returns (sup_stats, argmax_starts) aligned with plan.r2s.  Degenerate
    windows (near-singular normal matrix or an exact fit) are dropped from
    each supremum; an r2 whose windows all degenerate yields -inf and is
    resolved by the caller.
    """
    T, k = plan.T, plan.k
    m = k + 1
    dy = np.diff(y)
    nrows = T - 1 - k
    Z = np.empty((nrows, m))
    Z[:, 0] = y[k:-1]
    for i in range(1, k + 1):
        Z[:, i] = dy[k - i:T - 1 - i]
    d = dy[k:]
    Z = Z - Z.mean(axis=0)
    d = d - d.mean()

    def prefix(a):
        out = np.zeros((a.shape[0] + 1,) + a.shape[1:])
        np.cumsum(a, axis=0, out=out[1:])
        return out

    P_z = prefix(Z)
    P_d = prefix(d)
    P_zz = prefix(Z[:, :, None] * Z[:, None, :])
    P_zd = prefix(Z * d[:, None])
    P_dd = prefix(d * d)

    lo, hi, n = plan.lo, plan.hi, plan.n
    Sz = P_z[hi] - P_z[lo]
    Sd = P_d[hi] - P_d[lo]
    Szz = P_zz[hi] - P_zz[lo]
    Szd = P_zd[hi] - P_zd[lo]
    Sdd = P_dd[hi] - P_dd[lo]

    A = Szz - Sz[:, :, None] * Sz[:, None, :] / n[:, None, None]
    b = Szd - Sz * (Sd / n)[:, None]
    cdd = Sdd - Sd * Sd / n

    with np.errstate(divide="ignore", invalid="ignore"):
        if m == 1:
            a00 = A[:, 0, 0]
            bad = ~(a00 > 0.0)
            safe = np.where(bad, 1.0, a00)
            g0 = b[:, 0] / safe
            rss = cdd - g0 * b[:, 0]
            inv00 = 1.0 / safe
        elif m == 2:
            a00, a01, a11 = A[:, 0, 0], A[:, 0, 1], A[:, 1, 1]
            det = a00 * a11 - a01 * a01
            scale = a00 * a11
            bad = ~(det > 1e-14 * np.maximum(scale, 1e-300))
            det = np.where(bad, 1.0, det)
            g0 = (a11 * b[:, 0] - a01 * b[:, 1]) / det
            g1 = (-a01 * b[:, 0] + a00 * b[:, 1]) / det
            rss = cdd - (g0 * b[:, 0] + g1 * b[:, 1])
            inv00 = a11 / det
        else:
            diag = np.einsum("wii->wi", A)
            bad = np.zeros(A.shape[0], dtype=bool)
            rhs = np.concatenate([b[:, :, None], np.zeros((len(n), m, 1))], axis=2)
            rhs[:, 0, 1] = 1.0
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                sol = np.full_like(rhs, np.nan)
                for w in range(A.shape[0]):
                    try:
                        sol[w] = np.linalg.solve(A[w], rhs[w])
                    except np.linalg.LinAlgError:
                        bad[w] = True
            g = sol[:, :, 0]
            g0 = g[:, 0]
            inv00 = sol[:, 0, 1]
            rss = cdd - np.einsum("wj,wj->w", g, b)
            bad |= ~np.isfinite(g0) | ~(inv00 > 0.0) | ~(np.min(diag, axis=1) > 0.0)

        resp_scale = np.maximum(Sdd, 1.0)
        bad = bad | ~(rss > _RSS_RTOL * resp_scale)
        df = n - (m + 1)
        sigma2 = rss / df
        stat = g0 / np.sqrt(sigma2 * inv00)
    stat = np.where(bad | ~np.isfinite(stat), -np.inf, stat)

    n_seg = plan.r2s.shape[0]
    sup = np.maximum.reduceat(stat, plan.seg_starts)
    # argmax start per segment
    argmax = np.empty(n_seg, dtype=np.int64)
    seg_ends = np.append(plan.seg_starts[1:], stat.shape[0])
    for i in range(n_seg):
        seg = stat[plan.seg_starts[i]:seg_ends[i]]
        argmax[i] = int(np.argmax(seg))
    return sup, argmax


# ---------------------------------------------------------------------------
# public sweep API
# ---------------------------------------------------------------------------


def _check_engine(engine: str, spec: AdfSpec) -> str:
    if engine not in _ENGINES:
        raise ValidationError(f"engine must be one of {_ENGINES}, got {engine!r}")
    # per-window BIC selection has no prefix-sum formulation
    if spec.lag_selection == "bic":
        return "naive"
    return engine


def _bsadf_naive_at(y: np.ndarray, r2: int, r0: int, spec: AdfSpec) -> BsadfPoint:
    if r0 < spec.n_lags + 5:
        raise ValidationError(f"r0={r0} must be >= n_lags + 5 = {spec.n_lags + 5}")
    best, best_s1, failures = -np.inf, -1, 0
    n_windows = r2 - r0 + 1
    for s1 in range(0, n_windows):
        try:
            res = adf_stat(y[s1:r2 + 1], spec)
        except (SingularDesignError, InsufficientDataError):
            failures += 1
            continue
        if res.stat > best:
            best, best_s1 = res.stat, s1
    if failures == n_windows:
        raise NoValidWindowError(f"all {n_windows} windows ending at {r2} failed")
    return BsadfPoint(t_index=r2, stat=float(best), argmax_start=best_s1)


def bsadf_at(
    series, r2: int, r0: int, spec: AdfSpec = AdfSpec(), engine: str = "fast"
) -> BsadfPoint:
    """Backward supremum ADF at a single index r2.

    :param series: TimeSeries or 1-d array.
    :param r2: end index of the sweep, r2 >= r0.
    :param r0: minimum window setting (smallest admissible start is
        s1 = r2 - r0); must be >= n_lags + 5.
    """
    y = _as_values(series)
    if not (0 <= r2 < y.shape[0]):
        raise ValidationError(f"r2={r2} outside series of length {y.shape[0]}")
    if r2 < r0:
        raise ValidationError(f"r2={r2} < r0={r0}")
    engine = _check_engine(engine, spec)
    if engine == "naive":
        return _bsadf_naive_at(y, r2, r0, spec)
    plan = _WindowPlan(r2 + 1, r0, spec.n_lags)
    sup, argmax = _bsadf_fast(y[: r2 + 1], plan)
    if not np.isfinite(sup[-1]):
        raise NoValidWindowError(f"all windows ending at {r2} failed")
    return BsadfPoint(t_index=r2, stat=float(sup[-1]), argmax_start=int(argmax[-1]))


def bsadf_series(
    series, r0: int | None = None, spec: AdfSpec = AdfSpec(), engine: str = "fast"
) -> list[BsadfPoint]:
    """BSADF sequence: one point per r2 in [r0, T-1].

    ``r0=None`` applies :func:`default_min_window`.  The point at r2
    depends only on observations [0, r2], so appending data never changes
    earlier points (bit for bit on the naive engine; the fast engine's
    shared centering constant can move them by floating-point roundoff).
    """
    y = _as_values(series)
    T = y.shape[0]
    if not np.all(np.isfinite(y)):
        raise ValidationError("bsadf_series requires finite values")
    if r0 is None:
        r0 = default_min_window(T)
    if T <= r0:
        raise InsufficientDataError(f"series length {T} must exceed r0={r0}")
    engine = _check_engine(engine, spec)
    if engine == "naive":
        return [_bsadf_naive_at(y, r2, r0, spec) for r2 in range(r0, T)]
    plan = _WindowPlan(T, r0, spec.n_lags)
    sup, argmax = _bsadf_fast(y, plan)
    out = []
    for i, r2 in enumerate(plan.r2s):
        if not np.isfinite(sup[i]):
            raise NoValidWindowError(f"all windows ending at {int(r2)} failed")
        out.append(BsadfPoint(t_index=int(r2), stat=float(sup[i]), argmax_start=int(argmax[i])))
    return out


def mc_critical_values(
    series_length: int,
    min_window: int | None = None,
    spec: AdfSpec = AdfSpec(),
    alphas: tuple[float, ...] = (0.90, 0.95, 0.99),
    n_rep: int = 1000,
    seed: int = 0,
) -> CvTable:
    """Finite-sample critical values from simulated unit-root nulls.

    Each replication draws a driftless random walk of the requested length
    (i.i.d. standard normal increments, zero start) from a Philox stream
    keyed by (seed, replication index), computes its BSADF sequence, and
    the table is the per-t empirical quantile (type 7) at each alpha.
    Keying by replication index makes the result independent of any
    execution order or worker count.
    """
    if n_rep < 200:
        raise ValidationError(f"n_rep must be >= 200, got {n_rep}")
    alphas = tuple(float(a) for a in alphas)
    if not alphas or not all(0.0 < a < 1.0 for a in alphas):
        raise ValidationError(f"alphas must lie in (0, 1), got {alphas}")
    if sorted(alphas) != list(alphas):
        raise ValidationError("alphas must be sorted ascending")
    if spec.lag_selection != "fixed":
        raise ValidationError("mc_critical_values requires a fixed-lag AdfSpec")
    T = series_length
    if min_window is None:
        min_window = default_min_window(T)
    plan = _WindowPlan(T, min_window, spec.n_lags)
    n_pts = T - min_window
    stats = np.empty((n_rep, n_pts))
    for rep in range(n_rep):
        rng = Generator(Philox(key=[seed, rep]))
        y = np.concatenate([[0.0], np.cumsum(rng.standard_normal(T - 1))])
        sup, _ = _bsadf_fast(y, plan)
        stats[rep] = sup
    if not np.all(np.isfinite(stats)):
        raise NoValidWindowError("a null replication produced no valid window")
    cv = np.quantile(stats, alphas, axis=0).T.copy()
    return CvTable(
        series_length=T,
        min_window=min_window,
        alphas=alphas,
        cv_by_t=cv,
        n_rep=n_rep,
        seed=seed,
        n_lags=spec.n_lags,
    )


def datestamp(
    points: list[BsadfPoint],
    cv: CvTable,
    level: float = 0.95,
    dates=None,
) -> DatestampResult:
    """Stamp dates whose statistic strictly exceeds the critical value.

    :param points: full BSADF sequence from :func:`bsadf_series`.
    :param cv: table whose (T, r0) match the points.
    :param level: one of the table's alphas (default 0.95).
    :param dates: the parent series' dates (length T); episode bounds are
        reported in these dates.
    """
    if not points:
        raise ValidationError("datestamp needs at least one point")
    r0 = points[0].t_index
    T = points[-1].t_index + 1
    expected = list(range(r0, T))
    if [p.t_index for p in points] != expected:
        raise ValidationError("points must cover a contiguous range [r0, T-1]")
    if cv.series_length != T or cv.min_window != r0:
        raise ValidationError(
            f"cv table is for (T={cv.series_length}, r0={cv.min_window}), "
            f"points are for (T={T}, r0={r0})"
        )
    if dates is None:
        raise ValidationError("datestamp requires the parent series' dates")
    dates = tuple(dates)
    if len(dates) != T:
        raise ValidationError(f"{len(dates)} dates for series length {T}")

    col = cv.level_column(level)
    stats = np.array([p.stat for p in points])
    flags = stats > col
    eval_dates = dates[r0:]
    episodes = []
    i = 0
    n = len(points)
    while i < n:
        if flags[i]:
            j = i
            while j + 1 < n and flags[j + 1]:
                j += 1
            episodes.append(
                BubbleEpisode(
                    start=eval_dates[i],
                    end=eval_dates[j],
                    peak_stat=float(stats[i:j + 1].max()),
                )
            )
            i = j + 1
        else:
            i += 1
    return DatestampResult(
        level=float(level),
        dates=eval_dates,
        stats=stats,
        cvs=np.asarray(col, dtype=np.float64).copy(),
        flags=flags,
        episodes=tuple(episodes),
        pct_flagged=float(flags.sum()) / float(n),
    )
