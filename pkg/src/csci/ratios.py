"""Screening-ratio construction at the firm-year level.

Four ratios per accounting record: leverage (long-term plus current debt),
cash and interest-bearing assets (cash equivalents plus short- and long-term
investments), receivables, and impure income over sales.  The first three
are scaled either by market equity at the fiscal year-end or by total
assets; the impure ratio is always income-statement based.

Processing order is cap first (ratios clipped to [0, cap]), then a
cross-sectional winsorisation at the 1st/99th percentiles within each
fiscal year.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigError

MARKET_CAP = "market_cap"
TOTAL_ASSETS = "total_assets"

DEFAULT_CAP = 2.0

#: months of market history searched backwards when the fiscal-year-end
#: month itself has no market-equity observation
ME_LOOKBACK_MONTHS = 3

RATIO_NAMES = ("lev", "cashr", "rec", "impure")


@dataclass
class RatioVector:
    """One firm-year's ratio set plus validity marker."""

    lev: float
    cashr: float
    rec: float
    impure: float
    denominator_style: str
    me_at_fye: float
    valid: bool = True
    reason: str = ""


def _component_sum(*values) -> float:
    """Sum numerator components, flooring negatives at zero.

    Any missing component (NaN) poisons the sum: a field that is not
    explicitly zero-coded cannot be assumed absent.
    """
    total = 0.0
    for v in values:
        v = float(v) if v is not None else float("nan")
        if np.isnan(v):
            return float("nan")
        total += max(v, 0.0)
    return total


def impure_ratio(impure_income: float, sale: float, cap: float = DEFAULT_CAP) -> float:
    """Impure-income share of sales, with worst-case handling of bad sales.

    Non-positive sales with positive impure income score the cap (maximally
    non-compliant); non-positive sales with no impure income score 0.
    Missing inputs give NaN.
    """
    impure_income = float("nan") if impure_income is None else float(impure_income)
    sale = float("nan") if sale is None else float(sale)
    if np.isnan(impure_income) or np.isnan(sale):
        return float("nan")
    if sale > 0.0:
        return min(max(impure_income, 0.0) / sale, cap)
    return cap if impure_income > 0.0 else 0.0


def compute_ratios(record, me_at_fye: float, style: str = MARKET_CAP,
                   cap: float = DEFAULT_CAP) -> RatioVector:
    """Build the ratio vector for one accounting record.

    ``record`` is any mapping with the accounting fields (long_term_debt,
    current_debt, cash_equivalents, other_investments, short_term_investments,
    receivables, impure_income, sales, total_assets).
    """
    if style == MARKET_CAP:
        denom = me_at_fye
        bad = "non-positive market equity at fiscal year-end"
    elif style == TOTAL_ASSETS:
        denom = record.get("total_assets", float("nan"))
        bad = "non-positive total assets"
    else:
        raise ConfigError(f"unknown denominator style: {style!r}")

    denom = float("nan") if denom is None else float(denom)
    if np.isnan(denom) or denom <= 0.0:
        return RatioVector(
            lev=float("nan"), cashr=float("nan"), rec=float("nan"), impure=float("nan"),
            denominator_style=style, me_at_fye=me_at_fye, valid=False, reason=bad,
        )

    debt = _component_sum(record.get("long_term_debt"), record.get("current_debt"))
    cash = _component_sum(
        record.get("cash_equivalents"),
        record.get("other_investments"),
        record.get("short_term_investments"),
    )
    rect = _component_sum(record.get("receivables"))
    return RatioVector(
        lev=debt / denom,
        cashr=cash / denom,
        rec=rect / denom,
        impure=impure_ratio(record.get("impure_income"), record.get("sales"), cap),
        denominator_style=style,
        me_at_fye=me_at_fye,
        valid=True,
        reason="",
    )


def winsorize(values: np.ndarray, lower_pct: float = 1.0, upper_pct: float = 99.0) -> np.ndarray:
    """Clip to the linearly interpolated lower/upper percentiles.

    NaNs pass through untouched; groups smaller than two are returned
    unchanged.
    """
    out = np.asarray(values, dtype=float).copy()
    known = ~np.isnan(out)
    if known.sum() < 2:
        return out
    lo, hi = np.percentile(out[known], [lower_pct, upper_pct], method="linear")
    out[known] = np.clip(out[known], lo, hi)
    return out


def cap_and_winsorize(table: pd.DataFrame, cap: float = DEFAULT_CAP,
                      year_column: str = "fiscal_year") -> pd.DataFrame:
    """Cap each ratio at ``cap`` and winsorise within fiscal-year groups.

    Operates column-wise on lev/cashr/rec/impure; invalid vectors keep their
    NaNs.  Ratios are floored at zero by construction, so the cap clip is
    one-sided in practice.
    """
    out = table.copy()
    for name in RATIO_NAMES:
        out[name] = out[name].clip(lower=0.0, upper=cap)
    for _, idx in out.groupby(year_column, sort=False).groups.items():
        for name in RATIO_NAMES:
            out.loc[idx, name] = winsorize(out.loc[idx, name].to_numpy(dtype=float))
    return out


def market_equity_at_fye(market: pd.DataFrame, firm_id: str, fye: pd.Timestamp) -> float:
    """Market equity for the month containing the fiscal year-end.

    Falls back to the nearest prior month within ME_LOOKBACK_MONTHS; NaN if
    nothing usable is found.
    """
    fye_month = pd.Period(fye, freq="M")
    rows = market[market["firm_id"] == firm_id]
    for back in range(ME_LOOKBACK_MONTHS + 1):
        hit = rows[rows["month"] == fye_month - back]
        if len(hit):
            me = float(hit["me"].iloc[0])
            if me > 0.0:
                return me
    return float("nan")


def _me_lookup_frame(market: pd.DataFrame) -> pd.DataFrame:
    cols = market.loc[market["me"] > 0, ["firm_id", "month", "me"]]
    return cols.set_index(["firm_id", "month"])["me"]


def build_ratio_table(accounting: pd.DataFrame, market: pd.DataFrame,
                      style: str = MARKET_CAP, cap: float = DEFAULT_CAP) -> pd.DataFrame:
    """Ratio vectors for every linked accounting record.

    ``accounting`` must already carry the market firm id it maps to
    (column ``firm_id``) alongside the raw fundamentals.  Returns one row
    per (firm_id, fye) with ratio columns, validity flag and reason, plus
    the numerator columns used by denominator variants downstream.
    """
    me_lookup = _me_lookup_frame(market)

    rows = []
    for rec in accounting.itertuples(index=False):
        fye_month = pd.Period(rec.fye, freq="M")
        me = float("nan")
        for back in range(ME_LOOKBACK_MONTHS + 1):
            key = (rec.firm_id, fye_month - back)
            if key in me_lookup.index:
                me = float(me_lookup.loc[key])
                break
        record = {
            "long_term_debt": rec.dltt,
            "current_debt": rec.dlc,
            "cash_equivalents": rec.che,
            "other_investments": rec.ivao,
            "short_term_investments": rec.ivst,
            "receivables": rec.rect,
            "impure_income": rec.impure_income,
            "sales": rec.sale,
            "total_assets": rec.at,
        }
        vec = compute_ratios(record, me, style=style, cap=cap)
        if style == MARKET_CAP and not vec.valid:
            reason = "no market equity at fiscal year-end" if np.isnan(me) else vec.reason
        else:
            reason = vec.reason
        rows.append({
            "firm_id": rec.firm_id,
            "fye": rec.fye,
            "fiscal_year": rec.fye.year,
            "lev": vec.lev,
            "cashr": vec.cashr,
            "rec": vec.rec,
            "impure": vec.impure,
            "style": style,
            "valid": vec.valid,
            "reason": reason,
            "me_at_fye": me,
            "debt_num": _component_sum(rec.dltt, rec.dlc),
            "cash_num": _component_sum(rec.che, rec.ivao, rec.ivst),
            "rec_num": _component_sum(rec.rect),
            "sale": rec.sale,
            "at": rec.at,
        })
    table = pd.DataFrame(rows)
    if table.empty:
        return table
    return cap_and_winsorize(table, cap=cap)


RATIO_EXPORT_COLUMNS = ["firm_id", "fye", "lev", "cashr", "rec", "impure",
                        "style", "valid_flag", "reason"]


def ratio_records(table: pd.DataFrame) -> pd.DataFrame:
    """Export view of the ratio table."""
    view = table.rename(columns={"valid": "valid_flag"})[RATIO_EXPORT_COLUMNS].copy()
    view["fye"] = view["fye"].dt.strftime("%Y-%m-%d")
    return view.sort_values(["firm_id", "fye"], kind="mergesort").reset_index(drop=True)
