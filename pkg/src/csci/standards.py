"""Binary screening standards and their mapping onto the compliance scale.

Emulates the major pass/fail rule sets (AAOIFI, DJIM, MSCI, FTSE, S&P,
SC Malaysia) on the harmonised ratio panel, and recovers for each rule the
compliance-index cut that best replicates its pass set under a
misclassification loss (false negatives plus false positives), scanned over
a fixed grid with a smallest-cut tie break.

All standards are evaluated on the unified ratio panel so differences
reflect thresholds, not denominators.  The trailing-average market-equity
denominators some providers use are available as an opt-in variant that
recomputes debt/cash/receivables ratios monthly against a trailing mean of
market equity anchored at the formation month.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, DegenerateError
from .ratios import DEFAULT_CAP, MARKET_CAP, TOTAL_ASSETS

ONE_THIRD = 1.0 / 3.0

CANONICAL_NAMES = ("AAOIFI", "DJIM", "MSCI", "FTSE", "SP", "SCMalaysia")


@dataclass(frozen=True)
class StandardRule:
    """One binary standard's thresholds and sector policy reference.

    Ratio caps are inclusive upper bounds; a missing cap leaves that ratio
    unconstrained.  ``q_max`` bounds the non-permissible revenue share for
    single-tier standards; two-tier rules instead use ``mixed_activity_max``
    on the full share and ``prohibited_activity_max`` on the share arising
    from prohibited-adjacent sectors.
    """

    name: str
    impure_max: float
    debt_max: float = None
    cash_max: float = None
    rec_max: float = None
    q_max: float = None
    mixed_activity_max: float = None
    prohibited_activity_max: float = None
    denominator_style: str = MARKET_CAP
    trailing_window: int = None
    sector_policy: str = "default"

    def __post_init__(self):
        for label, value in (("impure_max", self.impure_max), ("debt_max", self.debt_max),
                             ("cash_max", self.cash_max), ("rec_max", self.rec_max),
                             ("q_max", self.q_max),
                             ("mixed_activity_max", self.mixed_activity_max),
                             ("prohibited_activity_max", self.prohibited_activity_max)):
            if value is not None and not (0.0 < value < 1.0):
                raise ConfigError(f"standard {self.name}: {label} must be in (0, 1), got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


def default_standards() -> dict:
    """The six built-in rule sets, harmonised to the unified ratio panel."""
    return {
        "AAOIFI": StandardRule(
            name="AAOIFI", debt_max=0.30, cash_max=0.30, rec_max=None,
            impure_max=0.05, q_max=0.05, denominator_style=MARKET_CAP,
        ),
        "DJIM": StandardRule(
            name="DJIM", debt_max=ONE_THIRD, cash_max=ONE_THIRD, rec_max=ONE_THIRD,
            impure_max=0.05, q_max=0.05, denominator_style=MARKET_CAP,
            trailing_window=24,
        ),
        "MSCI": StandardRule(
            name="MSCI", debt_max=ONE_THIRD, cash_max=ONE_THIRD, rec_max=ONE_THIRD,
            impure_max=0.05, q_max=0.05, denominator_style=TOTAL_ASSETS,
        ),
        "FTSE": StandardRule(
            name="FTSE", debt_max=ONE_THIRD, cash_max=ONE_THIRD, rec_max=0.50,
            impure_max=0.05, q_max=0.05, denominator_style=TOTAL_ASSETS,
        ),
        "SP": StandardRule(
            name="SP", debt_max=ONE_THIRD, cash_max=ONE_THIRD, rec_max=0.49,
            impure_max=0.05, q_max=0.05, denominator_style=MARKET_CAP,
            trailing_window=36,
        ),
        "SCMalaysia": StandardRule(
            name="SCMalaysia", debt_max=ONE_THIRD, cash_max=ONE_THIRD, rec_max=None,
            impure_max=0.05, q_max=None, mixed_activity_max=0.20,
            prohibited_activity_max=0.05, denominator_style=TOTAL_ASSETS,
        ),
    }


def load_standards(path) -> dict:
    """Read rules from a JSON file with one block per standard.

    Custom rule names beyond the built-in six are accepted so calibrated or
    experimental screens can run through the same machinery.
    """
    with open(path) as handle:
        raw = json.load(handle)
    blocks = raw["standards"] if isinstance(raw, dict) else raw
    rules = {}
    for block in blocks:
        if "name" not in block:
            raise ConfigError("standards file: rule block without a name")
        known = {f for f in StandardRule.__dataclass_fields__}
        unknown = set(block) - known
        if unknown:
            raise ConfigError(f"standards file: unknown keys {sorted(unknown)}")
        rules[block["name"]] = StandardRule(**block)
    if not rules:
        raise ConfigError("standards file: no rules defined")
    return rules


def write_standards(rules: dict, path) -> None:
    payload = {"standards": [rule.to_dict() for rule in rules.values()]}
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def trailing_average_me(market: pd.DataFrame, window: int) -> pd.Series:
    """Trailing mean of market equity over ``window`` months ending at each row.

    Requires the full window of history; earlier months give NaN.  Indexed
    like ``market``.
    """
    grouped = market.sort_values(["firm_id", "month"]).groupby("firm_id")["me"]
    rolled = grouped.rolling(window=window, min_periods=window).mean()
    rolled.index = rolled.index.droplevel(0)
    return rolled.reindex(market.index)


def evaluate_standard(rule: StandardRule, panel: pd.DataFrame,
                      policies: dict = None, use_trailing_me: bool = False,
                      cap: float = DEFAULT_CAP) -> pd.Series:
    """Pass indicator per firm-month for one standard.

    A firm-month passes when its sector screen clears and every configured
    ratio sits at or below its cap.  Missing ratios fail closed.  With
    ``use_trailing_me`` and a rule that carries a trailing window, the
    debt/cash/receivables checks are recomputed against trailing average
    market equity instead of the panel's unified ratios.
    """
    policies = policies or {}
    if rule.sector_policy not in policies:
        raise ConfigError(f"standard {rule.name}: unknown sector policy {rule.sector_policy!r}")
    policy = policies[rule.sector_policy]

    hard = policy.is_prohibited(panel["sector_code"])
    ok = ~hard
    q = panel["q"]
    if rule.q_max is not None:
        ok &= q.notna() & (q <= rule.q_max)
    if rule.mixed_activity_max is not None:
        ok &= q.notna() & (q <= rule.mixed_activity_max)
    if rule.prohibited_activity_max is not None:
        prohibited_share = q.where(policy.is_adjacent(panel["sector_code"]), 0.0)
        ok &= prohibited_share.notna() & (prohibited_share <= rule.prohibited_activity_max)

    if use_trailing_me and rule.trailing_window:
        trailing = trailing_average_me(panel, rule.trailing_window)
        ratios = {
            "lev": (panel["debt_num"] / trailing).clip(upper=cap),
            "cashr": (panel["cash_num"] / trailing).clip(upper=cap),
            "rec": (panel["rec_num"] / trailing).clip(upper=cap),
        }
    else:
        ratios = {"lev": panel["lev"], "cashr": panel["cashr"], "rec": panel["rec"]}

    for column, bound in (("lev", rule.debt_max), ("cashr", rule.cash_max),
                          ("rec", rule.rec_max)):
        if bound is not None:
            ok &= ratios[column].notna() & (ratios[column] <= bound)
    ok &= panel["impure"].notna() & (panel["impure"] <= rule.impure_max)
    return ok.rename(rule.name)


def binary_islamic_indicator(panel: pd.DataFrame, policies: dict = None) -> pd.Series:
    """Representative one-third screen used as the binary benchmark universe."""
    rule = StandardRule(
        name="binary_islamic", debt_max=ONE_THIRD, cash_max=ONE_THIRD,
        rec_max=ONE_THIRD, impure_max=0.05, q_max=0.05,
    )
    return evaluate_standard(rule, panel, policies=policies)


@dataclass
class MappingResult:
    """Best compliance-index cut replicating one binary standard."""

    standard: str
    tau: float
    loss: float
    fn_rate: float
    fp_rate: float
    compliant_fraction: float
    avg_csci_compliant: float
    n_obs: int
    n_missing: int

    def to_dict(self) -> dict:
        return asdict(self)


def misclassification_loss(passes: np.ndarray, csci: np.ndarray, tau: float) -> float:
    """Joint probability of disagreement between the pass set and {csci >= tau}."""
    implied = csci >= tau
    return float(np.mean((passes & ~implied) | (~passes & implied)))


def fit_tau(passes, csci, grid_step: float = 0.001, standard: str = "") -> MappingResult:
    """Scan the cut grid and keep the smallest minimiser of the loss.

    Rows with a missing index value are excluded from the scan and counted.
    All-pass or all-fail inputs are degenerate and raise.
    """
    passes = np.asarray(passes, dtype=bool)
    csci = np.asarray(csci, dtype=float)
    known = ~np.isnan(csci)
    n_missing = int((~known).sum())
    passes, csci = passes[known], csci[known]
    n = len(csci)
    if n == 0:
        raise DegenerateError(f"{standard or 'standard'}: no observations with a score")
    n_pass = int(passes.sum())
    if n_pass == 0:
        raise DegenerateError(f"{standard or 'standard'}: degenerate, all observations fail")
    if n_pass == n:
        raise DegenerateError(f"{standard or 'standard'}: degenerate, all observations pass")

    steps = int(round(1.0 / grid_step))
    taus = np.linspace(0.0, 1.0, steps + 1)
    pass_sorted = np.sort(csci[passes])
    fail_sorted = np.sort(csci[~passes])
    fn_counts = np.searchsorted(pass_sorted, taus, side="left")
    fp_counts = len(fail_sorted) - np.searchsorted(fail_sorted, taus, side="left")
    losses = (fn_counts + fp_counts) / n
    best = int(np.argmin(losses))  # first minimum = smallest tau

    return MappingResult(
        standard=standard,
        tau=float(taus[best]),
        loss=float(losses[best]),
        fn_rate=float(fn_counts[best] / n_pass),
        fp_rate=float(fp_counts[best] / (n - n_pass)),
        compliant_fraction=n_pass / n,
        avg_csci_compliant=float(csci[passes].mean()),
        n_obs=n,
        n_missing=n_missing,
    )


def pass_rate_table(rules: dict, panel: pd.DataFrame, policies: dict = None):
    """Pooled and annual pass rates per standard.

    Returns (summary, annual): the summary holds the pooled firm-month
    fraction and the mean of annual cross-sectional rates; the annual frame
    is long-form (standard, year, pass_rate).
    """
    if panel.empty:
        raise DataError("pass_rate_table: empty panel")
    years = panel["month"].map(lambda p: p.year)
    summary_rows, annual_rows = [], []
    for name, rule in rules.items():
        ind = evaluate_standard(rule, panel, policies=policies)
        by_year = ind.groupby(years).mean()
        for year, rate in by_year.items():
            annual_rows.append({"standard": name, "year": int(year), "pass_rate": float(rate)})
        summary_rows.append({
            "standard": name,
            "fraction": float(ind.mean()),
            "annual_mean": float(by_year.mean()),
        })
    return pd.DataFrame(summary_rows), pd.DataFrame(annual_rows)


def map_standards(rules: dict, panel: pd.DataFrame, policies: dict = None,
                  grid_step: float = 0.001) -> pd.DataFrame:
    """Fit the replicating cut for every rule; one row per standard."""
    rows = []
    for name, rule in rules.items():
        ind = evaluate_standard(rule, panel, policies=policies)
        result = fit_tau(ind.to_numpy(), panel["csci"].to_numpy(dtype=float),
                         grid_step=grid_step, standard=name)
        rows.append(result.to_dict())
    return pd.DataFrame(rows)
