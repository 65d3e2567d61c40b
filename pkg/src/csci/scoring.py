"""Continuous compliance scoring.

Maps screening ratios into per-dimension scores in [0, 1], combines them
through a weighted geometric mean, and multiplies by a sectoral factor to
produce the firm-month compliance index (`csci` column).

Scoring conventions:
  * a ratio at or below its comfort threshold scores exactly 1,
  * at or above its outer threshold it scores exactly 0,
  * in between it follows ((outer - R) / (outer - comfort)) ** curvature,
  * missing ratios drop out of the geometric mean with weights renormalised
    over the remaining dimensions,
  * a zero score on any present dimension forces the financial score to 0,
  * hard-prohibited sectors force the index to 0 regardless of ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError

DIMENSIONS = ("debt", "cash", "rec", "impure")

#: panel ratio column per scoring dimension
RATIO_COLUMNS = {"debt": "lev", "cash": "cashr", "rec": "rec", "impure": "impure"}


@dataclass(frozen=True)
class ScoreConfig:
    """Thresholds, curvatures, and weights for the compliance index.

    Defaults anchor the comfort bounds at the strictest limits used by the
    major screening standards and the outer bounds at the most permissive
    ones (debt/cash 30% vs one-third, receivables 33% vs 50%, impure income
    2.5% vs 5%), with quadratic decay between them.  The sectoral factor
    tolerates up to 5% non-permissible revenue fully and penalises smoothly
    up to a 20% ceiling.
    """

    comfort: dict = field(
        default_factory=lambda: {
            "debt": 0.30, "cash": 0.30, "rec": 0.33, "impure": 0.025,
        }
    )
    outer: dict = field(
        default_factory=lambda: {
            "debt": 1.0 / 3.0, "cash": 1.0 / 3.0, "rec": 0.50, "impure": 0.05,
        }
    )
    curvature: dict = field(
        default_factory=lambda: {"debt": 2.0, "cash": 2.0, "rec": 2.0, "impure": 2.0}
    )
    weights: dict = field(
        default_factory=lambda: {"debt": 0.25, "cash": 0.25, "rec": 0.25, "impure": 0.25}
    )
    sector_lower: float = 0.05
    sector_upper: float = 0.20
    sector_curvature: float = 2.0

    def __post_init__(self):
        for dim in DIMENSIONS:
            for table, name in ((self.comfort, "comfort"), (self.outer, "outer"),
                                (self.curvature, "curvature"), (self.weights, "weights")):
                if dim not in table:
                    raise ConfigError(f"score config missing {name}[{dim}]")
            lo, hi = self.comfort[dim], self.outer[dim]
            if not (0.0 <= lo < hi):
                raise ConfigError(
                    f"need 0 <= comfort < outer for '{dim}', got ({lo}, {hi})"
                )
            if self.curvature[dim] < 1.0:
                raise ConfigError(f"curvature[{dim}] must be >= 1")
            if self.weights[dim] < 0.0:
                raise ConfigError(f"weights[{dim}] must be >= 0")
        if abs(sum(self.weights[d] for d in DIMENSIONS) - 1.0) > 1e-12:
            raise ConfigError("dimension weights must sum to 1 within 1e-12")
        if not (0.0 <= self.sector_lower < self.sector_upper <= 1.0):
            raise ConfigError(
                "need 0 <= sector_lower < sector_upper <= 1, got "
                f"({self.sector_lower}, {self.sector_upper})"
            )
        if self.sector_curvature < 1.0:
            raise ConfigError("sector_curvature must be >= 1")

    def to_dict(self) -> dict:
        return {
            "comfort": dict(self.comfort),
            "outer": dict(self.outer),
            "curvature": dict(self.curvature),
            "weights": dict(self.weights),
            "sector_lower": self.sector_lower,
            "sector_upper": self.sector_upper,
            "sector_curvature": self.sector_curvature,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScoreConfig":
        kwargs = {}
        for key in ("comfort", "outer", "curvature", "weights"):
            if key in raw:
                kwargs[key] = dict(raw[key])
        for key in ("sector_lower", "sector_upper", "sector_curvature"):
            if key in raw:
                kwargs[key] = float(raw[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class SectorPolicy:
    """Classification of sector codes into screening categories.

    ``prohibited`` codes hard-gate the index to zero.  ``adjacent`` codes
    are treated as fully non-permissible activity when a standard applies a
    separate prohibited-activities tier (their q counts as prohibited
    revenue share); all other codes contribute zero prohibited share.
    """

    prohibited: frozenset = frozenset()
    adjacent: frozenset = frozenset()

    def is_prohibited(self, codes: pd.Series) -> pd.Series:
        return codes.astype(str).isin(self.prohibited)

    def is_adjacent(self, codes: pd.Series) -> pd.Series:
        return codes.astype(str).isin(self.adjacent)

    @classmethod
    def from_frame(cls, sectors: pd.DataFrame) -> "SectorPolicy":
        """Build a policy from a sectors table with columns (sector_code, category)."""
        cat = sectors["category"].astype(str).str.lower()
        codes = sectors["sector_code"].astype(str)
        return cls(
            prohibited=frozenset(codes[cat == "prohibited"]),
            adjacent=frozenset(codes[cat == "adjacent"]),
        )


def ratio_score(ratio: float, comfort: float, outer: float, curvature: float = 2.0) -> float:
    """Score a single screening ratio into [0, 1].

    Returns 1 for ``ratio <= comfort``, 0 for ``ratio >= outer``, and the
    power-ramp value in between.  A missing ratio (None/NaN) yields NaN.
    """
    if not comfort < outer:
        raise ConfigError(f"need comfort < outer, got ({comfort}, {outer})")
    if ratio is None or (isinstance(ratio, float) and math.isnan(ratio)):
        return float("nan")
    if ratio <= comfort:
        return 1.0
    if ratio >= outer:
        return 0.0
    return ((outer - ratio) / (outer - comfort)) ** curvature


def sector_factor(
    q: float,
    lower: float = 0.05,
    upper: float = 0.20,
    curvature: float = 2.0,
    hard_prohibited: bool = False,
) -> float:
    """Sectoral compliance factor in [0, 1] from non-permissible revenue share.

    Hard-prohibited firms score 0 outright (their activity share is treated
    as total).  Otherwise the share is tolerated fully up to ``lower``,
    scores 0 at or above ``upper``, and decays as a power ramp in between.
    """
    if not (0.0 <= lower < upper <= 1.0):
        raise ConfigError(f"need 0 <= lower < upper <= 1, got ({lower}, {upper})")
    if hard_prohibited:
        return 0.0
    if q is None or (isinstance(q, float) and math.isnan(q)):
        return float("nan")
    if q <= lower:
        return 1.0
    if q >= upper:
        return 0.0
    return ((upper - q) / (upper - lower)) ** curvature


def financial_score(scores, weights=None) -> float:
    """Weighted geometric mean of per-dimension scores.

    Missing entries (NaN) are dropped and the weights renormalised over the
    remaining dimensions.  Any zero among the present scores forces a zero
    result; all-missing input yields NaN.  The result is clamped into
    [min score, max score], which is where the exact geometric mean lives.
    """
    if weights is None:
        weights = [1.0] * len(scores)
    total = 0.0
    log_sum = 0.0
    lo, hi = 1.0, 0.0
    has_zero = False
    for c, w in zip(scores, weights):
        if c is None or (isinstance(c, float) and math.isnan(c)):
            continue
        if c == 0.0:
            has_zero = True
        total += w
        if c < lo:
            lo = c
        if c > hi:
            hi = c
    if total == 0.0:
        return float("nan")
    if has_zero:
        return 0.0
    for c, w in zip(scores, weights):
        if c is None or (isinstance(c, float) and math.isnan(c)):
            continue
        log_sum += (w / total) * math.log(c)
    value = math.exp(log_sum)
    return min(max(value, lo), hi)


def combine(b: float, f: float) -> float:
    """Multiplicative combination of sectoral factor and financial score.

    A zero sectoral factor dominates even when the financial score is
    missing; a positive factor with a missing financial score stays missing
    so data gaps remain distinguishable from violations.
    """
    if b == 0.0:
        return 0.0
    if math.isnan(b) or math.isnan(f):
        return float("nan")
    return b * f


def _ramp_scores(values: np.ndarray, lo: float, hi: float, curve: float) -> np.ndarray:
    out = np.full(values.shape, np.nan)
    known = ~np.isnan(values)
    v = values[known]
    s = np.empty_like(v)
    s[v <= lo] = 1.0
    s[v >= hi] = 0.0
    mid = (v > lo) & (v < hi)
    s[mid] = ((hi - v[mid]) / (hi - lo)) ** curve
    out[known] = s
    return out


def score_panel(panel: pd.DataFrame, config: ScoreConfig, policy: SectorPolicy) -> pd.DataFrame:
    """Attach score columns (c_*, b_sector, f_financial, csci) to a ratio panel.

    Expects the aligned firm-month panel with ratio columns lev/cashr/rec/
    impure, a q column, and sector_code.  Vectorised; agrees with the
    scalar functions row by row.
    """
    out = panel.copy()
    hard = policy.is_prohibited(out["sector_code"]).to_numpy()

    weights = np.zeros((len(out), len(DIMENSIONS)))
    cmat = np.empty((len(out), len(DIMENSIONS)))
    for j, dim in enumerate(DIMENSIONS):
        ratios = out[RATIO_COLUMNS[dim]].to_numpy(dtype=float)
        c = _ramp_scores(ratios, config.comfort[dim], config.outer[dim], config.curvature[dim])
        cmat[:, j] = c
        weights[:, j] = np.where(np.isnan(c), 0.0, config.weights[dim])
        out[f"c_{dim}"] = c

    q = out["q"].to_numpy(dtype=float)
    b = _ramp_scores(q, config.sector_lower, config.sector_upper, config.sector_curvature)
    b[hard] = 0.0
    out["b_sector"] = b

    wsum = weights.sum(axis=1)
    any_dim = wsum > 0
    f = np.full(len(out), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = np.where(np.isnan(cmat) | (cmat <= 0.0), 0.0, np.log(np.where(cmat > 0, cmat, 1.0)))
        raw = np.exp((weights * logc).sum(axis=1) / np.where(any_dim, wsum, 1.0))
    has_zero = np.nansum(cmat == 0.0, axis=1) > 0
    f[any_dim] = raw[any_dim]
    f[has_zero & any_dim] = 0.0
    # clamp into the attainable range of the geometric mean
    cmin = np.nanmin(np.where(np.isnan(cmat), np.inf, cmat), axis=1)
    cmax = np.nanmax(np.where(np.isnan(cmat), -np.inf, cmat), axis=1)
    f[any_dim] = np.clip(f[any_dim], cmin[any_dim], cmax[any_dim])
    out["f_financial"] = f

    csci = b * f
    csci[b == 0.0] = 0.0
    out["csci"] = csci
    return out


CSCI_EXPORT_COLUMNS = [
    "firm_id", "month", "c_debt", "c_cash", "c_rec", "c_impure",
    "b_sector", "f_financial", "csci",
]


def csci_records(panel: pd.DataFrame) -> pd.DataFrame:
    """Score-record view of a scored panel, sorted for stable export."""
    view = panel[CSCI_EXPORT_COLUMNS].copy()
    view["month"] = view["month"].astype(str)
    return view.sort_values(["firm_id", "month"], kind="mergesort").reset_index(drop=True)
