"""Performance statistics, factor regressions, and cross-sectional tests.

Annualisation follows the monthly conventions: means and intercepts scale
by 12, volatilities by sqrt(12).  Factor-regression inference uses a
Bartlett-kernel (Newey-West) covariance; zero lags recovers the
heteroskedasticity-only sandwich.  Cross-sectional slopes are averaged over
months with plain time-series standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd

from .errors import DataError

MONTHS_PER_YEAR = 12
DEFAULT_HAC_LAGS = 6
FACTOR_NAMES = ("mkt_rf", "smb", "hml", "rmw", "cma", "mom")

MIN_REGRESSION_MONTHS = 24
MIN_SUMMARY_MONTHS = 12
MAX_SKIPPED_FRACTION = 0.20
MIN_DECILE_FIRMS = 10


@dataclass
class PerformanceSummary:
    mean_excess_ann: float
    vol_ann: float
    sharpe: float
    sortino: float
    max_drawdown: float
    n_months: int
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def max_drawdown(returns: np.ndarray) -> float:
    """Largest peak-to-trough loss of the cumulated total-return index.

    The index starts at 1, so a first-month loss already counts.  Always in
    [-1, 0]; 0 for a series that never falls below a running peak.
    """
    index = np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(returns, dtype=float))])
    peaks = np.maximum.accumulate(index)
    return float(np.min(index / peaks - 1.0))


def performance_summary(returns, rf) -> PerformanceSummary:
    """Annualised excess-return statistics for a monthly series."""
    returns = np.asarray(returns, dtype=float)
    rf = np.asarray(rf, dtype=float)
    if len(returns) != len(rf):
        raise DataError("returns and risk-free series must align")
    if len(returns) < MIN_SUMMARY_MONTHS:
        raise DataError(f"need at least {MIN_SUMMARY_MONTHS} months, got {len(returns)}")
    excess = returns - rf
    mean_ann = float(excess.mean()) * MONTHS_PER_YEAR
    vol_ann = float(excess.std(ddof=1)) * math.sqrt(MONTHS_PER_YEAR)
    note = ""
    if vol_ann == 0.0:
        sharpe = float("nan")
        note = "zero volatility; sharpe undefined"
    else:
        sharpe = mean_ann / vol_ann
    downside = float(np.sqrt(np.mean(np.square(np.minimum(excess, 0.0)))))
    downside_ann = downside * math.sqrt(MONTHS_PER_YEAR)
    sortino = mean_ann / downside_ann if downside_ann > 0.0 else float("nan")
    return PerformanceSummary(
        mean_excess_ann=mean_ann,
        vol_ann=vol_ann,
        sharpe=sharpe,
        sortino=sortino,
        max_drawdown=max_drawdown(returns),
        n_months=len(returns),
        note=note,
    )


def _ols(y: np.ndarray, x: np.ndarray):
    """Least squares through the normal equations; returns (beta, residuals, xtx_inv)."""
    xtx = x.T @ x
    if np.linalg.matrix_rank(xtx) < x.shape[1]:
        raise DataError("rank-deficient regressor matrix")
    xtx_inv = np.linalg.inv(xtx)
    beta = xtx_inv @ (x.T @ y)
    resid = y - x @ beta
    return beta, resid, xtx_inv


def hac_covariance(x: np.ndarray, resid: np.ndarray, lags: int) -> np.ndarray:
    """Bartlett-kernel sandwich covariance of OLS coefficients.

    ``lags`` of zero gives the heteroskedasticity-only (White) estimator.
    No small-sample correction is applied.
    """
    xu = x * resid[:, None]
    meat = xu.T @ xu
    t = len(resid)
    for lag in range(1, min(lags, t - 1) + 1):
        weight = 1.0 - lag / (lags + 1.0)
        gamma = xu[lag:].T @ xu[:-lag]
        meat += weight * (gamma + gamma.T)
    xtx_inv = np.linalg.inv(x.T @ x)
    return xtx_inv @ meat @ xtx_inv


@dataclass
class RegressionReport:
    alpha_monthly: float
    alpha_annualized: float
    betas: dict
    t_stats: dict
    r_squared: float
    n_obs: int
    hac_lags: int

    def to_dict(self) -> dict:
        return asdict(self)


def factor_regression(excess_returns, factors: pd.DataFrame,
                      hac_lags: int = DEFAULT_HAC_LAGS,
                      factor_names=FACTOR_NAMES) -> RegressionReport:
    """Time-series regression of excess returns on factor returns.

    ``factors`` may carry more columns than requested; ``factor_names``
    selects the specification (empty means intercept-only).
    """
    y = np.asarray(excess_returns, dtype=float)
    names = [n for n in factor_names if n]
    if len(y) < MIN_REGRESSION_MONTHS:
        raise DataError(f"need at least {MIN_REGRESSION_MONTHS} months, got {len(y)}")
    if names:
        f = factors[list(names)].to_numpy(dtype=float)
        if len(f) != len(y):
            raise DataError("factor series must align with the return series")
        x = np.column_stack([np.ones(len(y)), f])
    else:
        x = np.ones((len(y), 1))
    if np.isnan(y).any() or np.isnan(x).any():
        raise DataError("missing values inside the regression window")

    beta, resid, _ = _ols(y, x)
    cov = hac_covariance(x, resid, hac_lags)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, beta / se, np.inf * np.sign(beta))

    ss_res = float(resid @ resid)
    ss_tot = float(np.square(y - y.mean()).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if not names:
        r_squared = 0.0

    labels = ["alpha"] + list(names)
    return RegressionReport(
        alpha_monthly=float(beta[0]),
        alpha_annualized=float(beta[0]) * MONTHS_PER_YEAR,
        betas={k: float(v) for k, v in zip(labels, beta)},
        t_stats={k: float(v) for k, v in zip(labels, tvals)},
        r_squared=float(r_squared),
        n_obs=len(y),
        hac_lags=hac_lags,
    )


@dataclass
class FmReport:
    """Averaged cross-sectional slopes with time-series t-statistics."""

    regressors: list
    mean_slopes: dict
    t_stats: dict
    n_months: int
    n_skipped: int
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regressors": list(self.regressors),
            "mean_slopes": dict(self.mean_slopes),
            "t_stats": dict(self.t_stats),
            "n_months": self.n_months,
            "n_skipped": self.n_skipped,
        }


def fama_macbeth(data: pd.DataFrame, response: str = "excess_ret_next",
                 regressors=("csci",), month_column: str = "month") -> FmReport:
    """Monthly cross-sections of next-month excess returns on characteristics.

    Each month with strictly more stocks than regressors (plus intercept)
    and a full-rank design contributes one slope vector; rank-deficient or
    thin months are skipped with a diagnostic, and more than 20% skipped is
    an error.
    """
    regressors = list(regressors)
    labels = ["intercept"] + regressors
    needed = [response] + regressors
    usable = data.dropna(subset=needed)

    slope_rows, diagnostics = [], []
    n_skipped = 0
    months = sorted(usable[month_column].unique())
    if not months:
        raise DataError("no usable months for cross-sectional regression")
    for month in months:
        block = usable[usable[month_column] == month]
        y = block[response].to_numpy(dtype=float)
        x = np.column_stack([np.ones(len(block))] +
                            [block[r].to_numpy(dtype=float) for r in regressors])
        if len(block) <= x.shape[1]:
            diagnostics.append(f"{month}: skipped, {len(block)} stocks for {x.shape[1]} regressors")
            n_skipped += 1
            continue
        if np.linalg.matrix_rank(x) < x.shape[1]:
            diagnostics.append(f"{month}: skipped, rank-deficient cross-section")
            n_skipped += 1
            continue
        beta, _, _ = _ols(y, x)
        slope_rows.append(beta)
    if n_skipped > MAX_SKIPPED_FRACTION * len(months):
        raise DataError(
            f"{n_skipped} of {len(months)} months skipped; cross-section too thin"
        )
    if not slope_rows:
        raise DataError("every month was skipped")

    slopes = np.vstack(slope_rows)
    means = slopes.mean(axis=0)
    n = len(slopes)
    if n > 1:
        sd = slopes.std(axis=0, ddof=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tvals = np.where(sd > 0, means / (sd / math.sqrt(n)), np.inf * np.sign(means))
    else:
        tvals = np.full(len(means), np.nan)

    return FmReport(
        regressors=labels,
        mean_slopes={k: float(v) for k, v in zip(labels, means)},
        t_stats={k: float(v) for k, v in zip(labels, tvals)},
        n_months=n,
        n_skipped=n_skipped,
        diagnostics=diagnostics,
    )


def assign_deciles(values: np.ndarray) -> np.ndarray:
    """Decile labels 1..10 by rank, ties sharing the lower decile."""
    s = pd.Series(values)
    ranks = s.rank(method="min").to_numpy()
    deciles = np.ceil(ranks * 10.0 / len(s)).astype(int)
    return np.clip(deciles, 1, 10)


DECILE_CHARACTERISTICS = ("csci", "log_me", "lev", "cashr", "rec", "impure")


def decile_table(panel: pd.DataFrame, characteristics=DECILE_CHARACTERISTICS):
    """Time-series average of cross-sectional means by compliance decile.

    Months with fewer than ten scored firms are skipped with a diagnostic.
    Returns (table, diagnostics); the table has one row per decile.
    """
    diagnostics = []
    monthly = []
    for month, block in panel.groupby("month", sort=True):
        scored = block[block["csci"].notna()].copy()
        if len(scored) < MIN_DECILE_FIRMS:
            diagnostics.append(f"{month}: skipped, {len(scored)} scored firms")
            continue
        deciles = assign_deciles(scored["csci"].to_numpy(dtype=float))
        if len(np.unique(deciles)) < 10:
            diagnostics.append(f"{month}: degenerate ties, {len(np.unique(deciles))} deciles occupied")
        scored["decile"] = deciles
        monthly.append(scored.groupby("decile")[list(characteristics)].mean())
    if not monthly:
        raise DataError("no month had enough scored firms for deciles")
    stacked = pd.concat(monthly, keys=range(len(monthly)))
    table = stacked.groupby(level=1).mean()
    table.index.name = "decile"
    return table.reset_index(), diagnostics


def frontier_table(rows: list) -> pd.DataFrame:
    """Frontier rows (label, avg csci, sharpe, alpha, drawdown), sorted by avg csci."""
    frame = pd.DataFrame(rows, columns=["label", "avg_csci", "sharpe",
                                        "alpha_ann", "max_drawdown"])
    return frame.sort_values("avg_csci", kind="mergesort").reset_index(drop=True)


def distribution_summary(panel: pd.DataFrame) -> pd.DataFrame:
    """Cross-sectional distribution of the compliance index.

    Two columns: all scored firm-months, and the subset with a positive
    sector gate (the investable side of the sector screens).
    """
    scored = panel[panel["csci"].notna()]
    permissible = scored[scored["b_sector"] > 0]

    def stats(block):
        csci = block["csci"].to_numpy(dtype=float)
        if len(csci) == 0:
            return {k: float("nan") for k in _DIST_ROWS}
        qs = np.percentile(csci, [1, 10, 25, 50, 75, 90, 99], method="linear")
        return {
            "n_firm_months": float(len(csci)),
            "mean": float(csci.mean()),
            "std": float(csci.std(ddof=1)) if len(csci) > 1 else 0.0,
            "p01": qs[0], "p10": qs[1], "p25": qs[2], "median": qs[3],
            "p75": qs[4], "p90": qs[5], "p99": qs[6],
            "mass_at_zero": float((csci == 0.0).mean()),
            "mass_ge_099": float((csci >= 0.99).mean()),
        }

    table = pd.DataFrame({
        "all_firms": stats(scored),
        "permissible_sectors": stats(permissible),
    })
    table.index.name = "statistic"
    return table.loc[list(_DIST_ROWS)].reset_index()


_DIST_ROWS = ("n_firm_months", "mean", "std", "p01", "p10", "p25", "median",
              "p75", "p90", "p99", "mass_at_zero", "mass_ge_099")
