"""End-to-end assembly: inputs -> aligned panel -> ratios -> scores.

The scored panel is the common currency of the later stages: one row per
eligible firm-month carrying market fields, the matched fiscal year, the
winsorised ratios, per-dimension scores, the sectoral factor, and the
compliance index.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import DataError
from .panel import LoadResult, load_inputs, build_panel
from .ratios import build_ratio_table
from .scoring import ScoreConfig, SectorPolicy, score_panel

RATIO_JOIN_COLUMNS = ["firm_id", "fye", "lev", "cashr", "rec", "impure",
                      "valid", "reason", "me_at_fye",
                      "debt_num", "cash_num", "rec_num"]


def load_from_config(config: RunConfig) -> LoadResult:
    config.require_inputs()
    sectors = config.sectors if config.sectors else None
    return load_inputs(config.accounting, config.market, config.links,
                       config.factors, sectors_path=sectors)


def scored_panel_from_loaded(loaded: LoadResult, score_config: ScoreConfig,
                             style: str, cap: float,
                             start=None, end=None, min_price=None):
    """Score every firm-month; returns (panel, policy, reports)."""
    panel, reports = build_panel(loaded, min_price=min_price)
    policy = SectorPolicy.from_frame(loaded.sectors) if len(loaded.sectors) else SectorPolicy()

    linked_acc = panel[panel["has_accounting"]][["acc_firm_id", "firm_id", "fye"]]
    acc = loaded.accounting.rename(columns={"firm_id": "acc_firm_id"})
    acc_for_ratios = (
        linked_acc.drop_duplicates()
        .merge(acc, on=["acc_firm_id", "fye"], how="left")
        .sort_values(["firm_id", "fye"], kind="mergesort")
        .reset_index(drop=True)
    )
    ratio_table = build_ratio_table(acc_for_ratios, panel, style=style, cap=cap)

    if ratio_table.empty:
        for col in RATIO_JOIN_COLUMNS[2:]:
            panel[col] = np.nan
    else:
        panel = panel.merge(ratio_table[RATIO_JOIN_COLUMNS], on=["firm_id", "fye"],
                            how="left")
    scored = score_panel(panel, score_config, policy)
    scored["log_me"] = np.log(scored["me"])

    if start is not None:
        scored = scored[scored["month"] >= start]
    if end is not None:
        scored = scored[scored["month"] <= end]
    if scored.empty:
        raise DataError("no firm-months inside the requested date range")
    return scored.reset_index(drop=True), policy, reports


def run_scoring(config: RunConfig):
    """Convenience wrapper: load inputs and score under a run config."""
    loaded = load_from_config(config)
    scored, policy, reports = scored_panel_from_loaded(
        loaded, config.score, config.denominator_style, config.ratio_cap,
        start=config.period_start, end=config.period_end, min_price=config.min_price,
    )
    return scored, policy, loaded, reports


def fm_frame(scored: pd.DataFrame, factors: pd.DataFrame,
             controls=("log_me",)) -> pd.DataFrame:
    """Stock-month frame for cross-sectional regressions.

    Adds the next month's excess return per firm (consecutive months only)
    and the requested control characteristics; ``past_ret`` is the current
    month's return.
    """
    frame = scored.sort_values(["firm_id", "month"], kind="mergesort").copy()
    rf = factors.set_index("month")["rf"]

    grp = frame.groupby("firm_id")
    frame["ret_next"] = grp["ret"].shift(-1)
    next_month_ok = grp["month"].shift(-1) == frame["month"] + 1
    frame.loc[~next_month_ok.fillna(False), "ret_next"] = np.nan
    rf_next = (frame["month"] + 1).map(rf)
    frame["excess_ret_next"] = frame["ret_next"] - rf_next
    if "past_ret" in controls:
        frame["past_ret"] = frame["ret"]
    return frame
