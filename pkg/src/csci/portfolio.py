"""Monthly-rebalanced portfolio construction and backtesting.

Universes form at the end of month t-1 from information available then
(scores, market equity), positions are held through month t, and the book
is rebalanced to the next target at the end of t.  One-way turnover is half
the L1 distance between the new target and the return-drifted weights, and
net return subtracts a linear cost per unit of turnover in the month the
trade happens.  The initial acquisition is not charged and the final month
carries no terminal rebalance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, DegenerateError
from .standards import binary_islamic_indicator

MARKET = "market"
BINARY_ISLAMIC = "binary_islamic"
THRESHOLD = "threshold"
TILT = "tilt"

DEFAULT_COST_RATE = 0.0025  # 25 bp per unit one-way turnover


@dataclass(frozen=True)
class PortfolioSpec:
    """What to hold and how to weight it."""

    kind: str
    tau: float = None
    tilt_exponent: float = None
    cost_rate: float = DEFAULT_COST_RATE

    def __post_init__(self):
        if self.kind not in (MARKET, BINARY_ISLAMIC, THRESHOLD, TILT):
            raise ConfigError(f"unknown portfolio kind: {self.kind!r}")
        if self.kind == THRESHOLD:
            if self.tau is None or not (0.0 < self.tau <= 1.0):
                raise ConfigError(f"threshold portfolio needs tau in (0, 1], got {self.tau}")
        if self.kind == TILT:
            if self.tilt_exponent is None or self.tilt_exponent < 0.0:
                raise ConfigError("tilt portfolio needs tilt_exponent >= 0")
        if self.cost_rate < 0.0:
            raise ConfigError("cost_rate must be >= 0")

    @property
    def label(self) -> str:
        if self.kind == THRESHOLD:
            return f"threshold_{self.tau:g}"
        if self.kind == TILT:
            return f"tilt_{self.tilt_exponent:g}"
        return self.kind

    @classmethod
    def from_dict(cls, raw: dict) -> "PortfolioSpec":
        return cls(
            kind=raw["kind"],
            tau=raw.get("tau"),
            tilt_exponent=raw.get("tilt_exponent"),
            cost_rate=raw.get("cost_rate", DEFAULT_COST_RATE),
        )


@dataclass
class BacktestResult:
    """Monthly series and characteristics for one backtested spec."""

    label: str
    months: list
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    characteristics: pd.DataFrame
    weights: dict = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        """One row per return month, with formation-month characteristics."""
        out = pd.DataFrame({
            "month": [str(m) for m in self.months],
            "gross": self.gross,
            "net": self.net,
            "turnover": self.turnover,
        })
        chars = self.characteristics.reset_index(drop=True)
        return pd.concat([out, chars.drop(columns=["month"])], axis=1)


def build_universe(spec: PortfolioSpec, formation: pd.DataFrame,
                   policies: dict = None) -> pd.Index:
    """Eligible firms at a formation month.

    ``formation`` is the scored panel slice for that month.  All kinds
    require a non-missing score; thresholds additionally require
    csci >= tau, tilts csci > 0, and the binary benchmark its indicator.
    """
    base = formation[formation["csci"].notna()]
    if spec.kind == MARKET:
        chosen = base
    elif spec.kind == THRESHOLD:
        chosen = base[base["csci"] >= spec.tau]
    elif spec.kind == TILT:
        chosen = base[base["csci"] > 0.0]
    elif spec.kind == BINARY_ISLAMIC:
        chosen = base[binary_islamic_indicator(base, policies=policies)]
    else:  # pragma: no cover - spec validation rejects earlier
        raise ConfigError(f"unknown portfolio kind: {spec.kind!r}")
    if chosen.empty:
        month = formation["month"].iloc[0] if len(formation) else "?"
        raise DegenerateError(f"{spec.label}: empty universe at {month}")
    return chosen.index


def target_weights(spec: PortfolioSpec, formation: pd.DataFrame,
                   universe: pd.Index) -> pd.Series:
    """Portfolio weights over the universe, summing to one.

    Value weights by market equity; tilt portfolios scale market equity by
    csci raised to the tilt exponent, which reduces to value weights at
    exponent zero.
    """
    rows = formation.loc[universe]
    me = rows["me"].to_numpy(dtype=float)
    if np.any(me <= 0) or np.any(np.isnan(me)):
        raise DataError(f"{spec.label}: non-positive market equity in universe")
    if spec.kind == TILT:
        raw = np.power(rows["csci"].to_numpy(dtype=float), spec.tilt_exponent) * me
    else:
        raw = me
    total = raw.sum()
    if total <= 0.0:
        raise DegenerateError(f"{spec.label}: all target weights zero")
    return pd.Series(raw / total, index=rows["firm_id"].to_numpy())


def step_month(prev_weights: pd.Series, returns: pd.Series,
               new_targets: pd.Series = None, cost_rate: float = 0.0):
    """Hold one month, then rebalance.

    Returns (gross return, net return, drifted weights, one-way turnover).
    Firms with no return observation contribute zero for the month and are
    sold at the rebalance.  ``new_targets`` of None means no trade (final
    month), so turnover is zero and net equals gross.
    """
    r = returns.reindex(prev_weights.index)
    if np.isinf(r.to_numpy(dtype=float)).any():
        raise DataError("non-finite return in held names")
    r = r.fillna(0.0)
    gross = float((prev_weights * r).sum())
    grown = prev_weights * (1.0 + r)
    total = float(grown.sum())
    if total <= 0.0:
        raise DataError("portfolio value wiped out; drifted weights undefined")
    drifted = grown / total
    if new_targets is None:
        return gross, gross, drifted, 0.0
    union = drifted.index.union(new_targets.index)
    gap = new_targets.reindex(union, fill_value=0.0) - drifted.reindex(union, fill_value=0.0)
    turnover = 0.5 * float(gap.abs().sum())
    net = gross - cost_rate * turnover
    return gross, net, drifted, turnover


def characteristics(weights: pd.Series, formation: pd.DataFrame) -> dict:
    """Breadth and weighted balance-sheet profile of a weight vector."""
    rows = formation.set_index("firm_id").loc[weights.index]
    w = weights.to_numpy(dtype=float)

    def weighted(col):
        values = rows[col].to_numpy(dtype=float)
        mask = ~np.isnan(values)
        if not mask.any():
            return float("nan")
        return float((w[mask] * values[mask]).sum() / w[mask].sum())

    return {
        "n_stocks": int((w > 0).sum()),
        "effective_n": float(1.0 / np.square(w).sum()),
        "w_debt": weighted("lev"),
        "w_cash": weighted("cashr"),
        "w_rec": weighted("rec"),
        "w_csci": weighted("csci"),
    }


def run_backtest(spec: PortfolioSpec, panel: pd.DataFrame, start=None, end=None,
                 policies: dict = None, keep_weights: bool = False) -> BacktestResult:
    """Backtest one spec over the panel's months.

    Formation months run from the first month in range through the
    second-to-last; return months are offset by one.  Fully deterministic
    given panel and spec.
    """
    months = sorted(panel["month"].unique())
    if start is not None:
        months = [m for m in months if m >= start]
    if end is not None:
        months = [m for m in months if m <= end]
    if len(months) < 2:
        raise DataError(f"{spec.label}: need at least two months, got {len(months)}")

    wanted = set(months)
    by_month = {m: g for m, g in panel.groupby("month", sort=True) if m in wanted}

    # targets and characteristics at every formation month (all but the last)
    targets, char_rows = [], []
    weights_history = {}
    for formation_month in months[:-1]:
        formation = by_month[formation_month]
        universe = build_universe(spec, formation, policies=policies)
        target = target_weights(spec, formation, universe)
        targets.append(target)
        char_rows.append({"month": str(formation_month), **characteristics(target, formation)})
        if keep_weights:
            weights_history[str(formation_month)] = target.copy()

    held = targets[0]  # initial acquisition is not charged
    gross_series, net_series, turn_series, ret_months = [], [], [], []
    for j, return_month in enumerate(months[1:]):
        month_rows = by_month.get(return_month)
        returns = (month_rows.set_index("firm_id")["ret"]
                   if month_rows is not None else pd.Series(dtype=float))
        new_target = targets[j + 1] if j + 1 < len(targets) else None
        gross, net, drifted, turnover = step_month(
            held, returns, new_target, cost_rate=spec.cost_rate
        )
        gross_series.append(gross)
        net_series.append(net)
        turn_series.append(turnover)
        ret_months.append(return_month)
        held = new_target if new_target is not None else drifted

    return BacktestResult(
        label=spec.label,
        months=ret_months,
        gross=np.asarray(gross_series),
        net=np.asarray(net_series),
        turnover=np.asarray(turn_series),
        characteristics=pd.DataFrame(char_rows),
        weights=weights_history,
    )
