"""Input loading and firm-month panel construction.

Reads the four CSV inputs (accounting, market, links, factors) plus the
sector table, applies the share-code/exchange-code eligibility filters, and
aligns annual accounting records to firm-months under a six-calendar-month
reporting lag: a fiscal year becomes usable in the first month that starts
strictly after fiscal-year-end + 6 months and stays usable until the month
before the next fiscal year's window opens.

All month columns are pandas monthly Periods internally and "YYYY-MM"
strings on disk; fiscal year-ends are ISO dates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError

ACCOUNTING_COLUMNS = ["firm_id", "fye", "dltt", "dlc", "che", "ivao", "ivst",
                      "rect", "impure_income", "sale", "at"]
MARKET_COLUMNS = ["firm_id", "month", "prc", "ret", "dlret", "shrout",
                  "sector_code", "q", "shrcd", "exchcd"]
LINK_COLUMNS = ["accounting_firm_id", "market_firm_id", "link_start",
                "link_end", "link_type", "link_primacy"]
FACTOR_COLUMNS = ["month", "mkt_rf", "smb", "hml", "rmw", "cma", "mom", "rf"]
SECTOR_COLUMNS = ["sector_code", "category"]

DEFAULT_LINK_TYPES = frozenset({"LU", "LC", "LS", "LD", "LN", "LX"})
DEFAULT_LINK_PRIMACIES = frozenset({"P", "C"})

ELIGIBLE_SHARE_CODES = frozenset({10, 11})
ELIGIBLE_EXCHANGE_CODES = frozenset({1, 2, 3})

REPORTING_LAG_MONTHS = 6


@dataclass
class LoadResult:
    """Parsed input tables plus row-level parse diagnostics."""

    accounting: pd.DataFrame
    market: pd.DataFrame
    links: pd.DataFrame
    factors: pd.DataFrame
    sectors: pd.DataFrame
    diagnostics: list = field(default_factory=list)


def _read_raw(path, expected_columns, name):
    try:
        raw = pd.read_csv(path, dtype=str, comment="#", skip_blank_lines=True)
    except FileNotFoundError:
        raise DataError(f"missing input file: {path}")
    except pd.errors.EmptyDataError:
        raise DataError(f"empty input file: {path}")
    missing = [c for c in expected_columns if c not in raw.columns]
    if missing:
        raise DataError(f"{name}: malformed header, missing columns {missing}")
    return raw


def _coerce_numeric(raw, columns, name, diagnostics, required=()):
    """Convert columns to float, rejecting rows whose non-empty cells fail to parse."""
    frame = raw.copy()
    bad = pd.Series(False, index=frame.index)
    for col in columns:
        source = frame[col].str.strip() if frame[col].dtype == object else frame[col]
        values = pd.to_numeric(source, errors="coerce")
        failed = values.isna() & source.notna() & (source != "")
        if col in required:
            failed |= values.isna()
        for i in frame.index[failed]:
            diagnostics.append(f"{name}: row {i}: unparseable {col}={frame[col][i]!r}")
        bad |= failed
        frame[col] = values
    return frame[~bad].copy(), int(bad.sum())


def _parse_months(frame, column, name, diagnostics):
    parsed = pd.to_datetime(frame[column], format="%Y-%m", errors="coerce")
    failed = parsed.isna()
    for i in frame.index[failed]:
        diagnostics.append(f"{name}: row {i}: unparseable {column}={frame[column][i]!r}")
    frame = frame[~failed].copy()
    frame[column] = pd.PeriodIndex(parsed[~failed], freq="M")
    return frame


def _check_unique(frame, keys, name):
    dupes = frame.duplicated(subset=keys, keep=False)
    if dupes.any():
        first = frame.loc[dupes, keys].iloc[0].tolist()
        raise DataError(f"{name}: duplicate key {tuple(first)} on ({', '.join(keys)})")


def load_inputs(accounting_path, market_path, links_path, factors_path,
                sectors_path=None) -> LoadResult:
    """Load and type-check the CSV inputs.

    Rows failing type checks are dropped with a diagnostic each; duplicate
    (firm_id, fye) or (firm_id, month) keys are hard errors.
    """
    diagnostics: list = []

    acc_raw = _read_raw(accounting_path, ACCOUNTING_COLUMNS, "accounting")
    acc_raw["firm_id"] = acc_raw["firm_id"].astype(str)
    fye = pd.to_datetime(acc_raw["fye"], format="%Y-%m-%d", errors="coerce")
    bad_fye = fye.isna()
    for i in acc_raw.index[bad_fye]:
        diagnostics.append(f"accounting: row {i}: unparseable fye={acc_raw['fye'][i]!r}")
    acc_raw = acc_raw[~bad_fye].copy()
    acc_raw["fye"] = fye[~bad_fye]
    acc, _ = _coerce_numeric(
        acc_raw, ["dltt", "dlc", "che", "ivao", "ivst", "rect", "impure_income", "sale", "at"],
        "accounting", diagnostics,
    )
    _check_unique(acc, ["firm_id", "fye"], "accounting")
    neg_at = acc["at"].notna() & (acc["at"] < 0)
    for i in acc.index[neg_at]:
        diagnostics.append(f"accounting: row {i}: negative total assets")
    acc = acc[~neg_at].copy()
    acc = acc.sort_values(["firm_id", "fye"], kind="mergesort").reset_index(drop=True)

    mkt_raw = _read_raw(market_path, MARKET_COLUMNS, "market")
    mkt_raw["firm_id"] = mkt_raw["firm_id"].astype(str)
    mkt_raw["sector_code"] = mkt_raw["sector_code"].astype(str).str.strip()
    mkt_raw = _parse_months(mkt_raw, "month", "market", diagnostics)
    mkt, _ = _coerce_numeric(
        mkt_raw, ["prc", "ret", "dlret", "shrout", "q", "shrcd", "exchcd"],
        "market", diagnostics, required=("q", "shrcd", "exchcd"),
    )
    bad_q = (mkt["q"] < 0) | (mkt["q"] > 1)
    for i in mkt.index[bad_q]:
        diagnostics.append(f"market: row {i}: q outside [0, 1]")
    mkt = mkt[~bad_q].copy()
    _check_unique(mkt, ["firm_id", "month"], "market")
    mkt["me"] = mkt["prc"].abs() * mkt["shrout"]
    mkt = mkt.sort_values(["firm_id", "month"], kind="mergesort").reset_index(drop=True)

    lnk_raw = _read_raw(links_path, LINK_COLUMNS, "links")
    for col in ("accounting_firm_id", "market_firm_id", "link_type", "link_primacy"):
        lnk_raw[col] = lnk_raw[col].astype(str).str.strip()
    lnk_raw["link_start"] = pd.to_datetime(lnk_raw["link_start"], errors="coerce")
    lnk_raw["link_end"] = pd.to_datetime(lnk_raw["link_end"], errors="coerce")
    bad_start = lnk_raw["link_start"].isna()
    for i in lnk_raw.index[bad_start]:
        diagnostics.append(f"links: row {i}: unparseable link_start")
    lnk = lnk_raw[~bad_start].copy()
    inverted = lnk["link_end"].notna() & (lnk["link_end"] < lnk["link_start"])
    if inverted.any():
        raise DataError("links: link_start after link_end")
    lnk = lnk.reset_index(drop=True)

    fct_raw = _read_raw(factors_path, FACTOR_COLUMNS, "factors")
    fct_raw = _parse_months(fct_raw, "month", "factors", diagnostics)
    fct, _ = _coerce_numeric(
        fct_raw, ["mkt_rf", "smb", "hml", "rmw", "cma", "mom", "rf"],
        "factors", diagnostics,
    )
    _check_unique(fct, ["month"], "factors")
    fct = fct.sort_values("month", kind="mergesort").reset_index(drop=True)

    if sectors_path is not None:
        sec = _read_raw(sectors_path, SECTOR_COLUMNS, "sectors")
        sec["sector_code"] = sec["sector_code"].astype(str).str.strip()
        sec["category"] = sec["category"].astype(str).str.strip().str.lower()
    else:
        sec = pd.DataFrame(columns=SECTOR_COLUMNS)

    return LoadResult(acc, mkt, lnk, fct, sec, diagnostics)


def adjust_delisting_returns(market: pd.DataFrame):
    """Fold delisting returns into the final month's total return.

    Both present: compounded (1+ret)(1+dlret)-1.  Only one present: that one.
    Neither: the row is dropped (counted in the report).
    """
    out = market.copy()
    ret, dlret = out["ret"], out["dlret"]
    both = ret.notna() & dlret.notna()
    only_dl = ret.isna() & dlret.notna()
    neither = ret.isna() & dlret.isna()
    combined = ret.copy()
    combined[both] = (1.0 + ret[both]) * (1.0 + dlret[both]) - 1.0
    combined[only_dl] = dlret[only_dl]
    out["ret"] = combined
    out["delisted"] = dlret.notna()
    report = {"input_rows": len(out), "dropped_no_return": int(neither.sum())}
    out = out[~neither].copy()
    report["retained"] = len(out)
    return out, report


def apply_eligibility(market: pd.DataFrame, min_price: float = None):
    """Share-code, exchange-code, price/size, and return-presence filters.

    ``min_price`` enables the optional liquidity screen (off by default).
    Returns the retained rows and a per-filter count report; retained plus
    dropped always reconciles with the input row count.
    """
    n_input = len(market)
    keep = pd.Series(True, index=market.index)
    report = {"input_rows": n_input}

    bad_share = ~market["shrcd"].isin(ELIGIBLE_SHARE_CODES)
    report["dropped_share_code"] = int((keep & bad_share).sum())
    keep &= ~bad_share

    bad_exch = ~market["exchcd"].isin(ELIGIBLE_EXCHANGE_CODES)
    report["dropped_exchange_code"] = int((keep & bad_exch).sum())
    keep &= ~bad_exch

    bad_price = market["prc"].isna() | (market["prc"].abs() <= 0) | (market["me"] <= 0)
    report["dropped_price_or_size"] = int((keep & bad_price).sum())
    keep &= ~bad_price

    if min_price is not None:
        below = market["prc"].abs() < min_price
        report["dropped_below_min_price"] = int((keep & below).sum())
        keep &= ~below

    bad_ret = market["ret"].isna()
    report["dropped_missing_return"] = int((keep & bad_ret).sum())
    keep &= ~bad_ret

    out = market[keep].copy().reset_index(drop=True)
    report["retained"] = len(out)
    assert report["retained"] + sum(
        v for k, v in report.items() if k.startswith("dropped_")
    ) == n_input
    return out, report


def availability_window(fye: pd.Timestamp, next_fye=None):
    """Investable month interval for a fiscal year under the reporting lag.

    Starts at the first month strictly after fye + 6 calendar months (numpy
    month arithmetic clamps day-of-month to the month end); ends the month
    before the next record's window opens, or stays open when there is no
    next record.
    """
    avail = fye + pd.DateOffset(months=REPORTING_LAG_MONTHS)
    start = pd.Period(avail, freq="M") + 1
    if next_fye is None or pd.isna(next_fye):
        return start, None
    next_avail = next_fye + pd.DateOffset(months=REPORTING_LAG_MONTHS)
    next_start = pd.Period(next_avail, freq="M") + 1
    if next_start <= start:
        raise DataError(
            f"overlapping fiscal years: window starting {next_start} does not follow {start}"
        )
    return start, next_start - 1


def _select_links(links: pd.DataFrame, link_types, link_primacies) -> pd.DataFrame:
    mask = links["link_type"].isin(link_types) & links["link_primacy"].isin(link_primacies)
    return links[mask]


def link_accounting(accounting: pd.DataFrame, links: pd.DataFrame,
                    link_types=DEFAULT_LINK_TYPES,
                    link_primacies=DEFAULT_LINK_PRIMACIES) -> pd.DataFrame:
    """Map accounting records onto market identifiers through the link table.

    A record links when its fiscal year-end falls inside the link's
    effective interval.  Two records landing on the same (market firm,
    fye) is a hard duplicate-match error.
    """
    usable = _select_links(links, link_types, link_primacies)
    merged = accounting.merge(
        usable, left_on="firm_id", right_on="accounting_firm_id", how="inner"
    )
    open_ended = merged["link_end"].isna()
    in_window = (merged["link_start"] <= merged["fye"]) & (
        open_ended | (merged["fye"] <= merged["link_end"])
    )
    merged = merged[in_window].copy()
    merged = merged.drop(columns=["firm_id"]).rename(columns={"market_firm_id": "firm_id"})
    dupes = merged.duplicated(subset=["firm_id", "fye"], keep=False)
    if dupes.any():
        key = merged.loc[dupes, ["firm_id", "fye"]].iloc[0].tolist()
        raise DataError(f"duplicate accounting match for market firm {key[0]} at fye {key[1]}")
    keep = ["firm_id", "accounting_firm_id", "fye", "dltt", "dlc", "che", "ivao",
            "ivst", "rect", "impure_income", "sale", "at"]
    return merged[keep].sort_values(["firm_id", "fye"], kind="mergesort").reset_index(drop=True)


def accounting_windows(linked: pd.DataFrame) -> pd.DataFrame:
    """Availability window per linked accounting record."""
    rows = []
    for firm_id, grp in linked.groupby("firm_id", sort=False):
        fyes = grp["fye"].tolist()
        for i, fye in enumerate(fyes):
            nxt = fyes[i + 1] if i + 1 < len(fyes) else None
            start, end = availability_window(fye, nxt)
            rows.append({
                "firm_id": firm_id,
                "fye": fye,
                "window_start": start,
                "window_end": end,
                "avail_date": fye + pd.DateOffset(months=REPORTING_LAG_MONTHS),
            })
    return pd.DataFrame(rows)


def link_and_align(accounting: pd.DataFrame, market: pd.DataFrame, links: pd.DataFrame,
                   link_types=DEFAULT_LINK_TYPES,
                   link_primacies=DEFAULT_LINK_PRIMACIES) -> pd.DataFrame:
    """Attach to each market firm-month the accounting record investable then.

    Firm-months before any window (or in gaps) are retained with
    ``has_accounting`` False so they can still enter universes that do not
    need ratios; they are excluded from score computation downstream.
    """
    linked = link_accounting(accounting, links, link_types, link_primacies)
    panel = market.copy()
    if linked.empty:
        panel["fye"] = pd.NaT
        panel["avail_date"] = pd.NaT
        panel["acc_firm_id"] = None
        panel["has_accounting"] = False
        return panel.reset_index(drop=True)

    windows = accounting_windows(linked)
    windows["start_ord"] = windows["window_start"].map(lambda p: p.ordinal)
    windows["end_ord"] = windows["window_end"].map(
        lambda p: np.inf if pd.isna(p) else float(p.ordinal)
    )
    windows = windows.sort_values(["start_ord", "firm_id"], kind="mergesort")

    panel["month_ord"] = panel["month"].map(lambda p: p.ordinal)
    panel = panel.sort_values(["month_ord", "firm_id"], kind="mergesort")

    aligned = pd.merge_asof(
        panel, windows[["firm_id", "fye", "start_ord", "end_ord", "avail_date"]],
        left_on="month_ord", right_on="start_ord", by="firm_id", direction="backward",
    )
    covered = aligned["start_ord"].notna() & (aligned["month_ord"] <= aligned["end_ord"])
    aligned["has_accounting"] = covered
    aligned.loc[~covered, ["fye", "avail_date"]] = pd.NaT
    aligned = aligned.drop(columns=["start_ord", "end_ord", "month_ord"])
    aligned = aligned.merge(
        linked[["firm_id", "fye", "accounting_firm_id"]],
        on=["firm_id", "fye"], how="left",
    ).rename(columns={"accounting_firm_id": "acc_firm_id"})
    return aligned.sort_values(["firm_id", "month"], kind="mergesort").reset_index(drop=True)


def assert_no_lookahead(panel: pd.DataFrame) -> int:
    """Count (and require zero) firm-months whose accounting was not yet available.

    A row violates when its availability date falls on or after the first
    day of its own month.
    """
    rows = panel[panel["has_accounting"]]
    month_start = rows["month"].map(lambda p: p.start_time)
    violations = int((rows["avail_date"] >= month_start).sum())
    if violations:
        raise DataError(f"look-ahead violation on {violations} firm-months")
    return violations


def build_panel(loaded: LoadResult, link_types=DEFAULT_LINK_TYPES,
                link_primacies=DEFAULT_LINK_PRIMACIES, min_price: float = None):
    """Full market-side pipeline: delisting adjustment, eligibility, alignment."""
    adjusted, delist_report = adjust_delisting_returns(loaded.market)
    eligible, elig_report = apply_eligibility(adjusted, min_price=min_price)
    panel = link_and_align(loaded.accounting, eligible, loaded.links,
                           link_types, link_primacies)
    assert_no_lookahead(panel)
    return panel, {"delisting": delist_report, "eligibility": elig_report}


PANEL_EXPORT_COLUMNS = ["firm_id", "month", "prc", "ret", "shrout", "me",
                        "sector_code", "q", "fye", "has_accounting"]


def panel_records(panel: pd.DataFrame) -> pd.DataFrame:
    """Export view of the aligned panel."""
    view = panel[PANEL_EXPORT_COLUMNS].copy()
    view["month"] = view["month"].astype(str)
    view["fye"] = view["fye"].dt.strftime("%Y-%m-%d")
    return view.sort_values(["firm_id", "month"], kind="mergesort").reset_index(drop=True)
