"""Continuous Shariah compliance scoring, standard emulation, and backtesting.

Turns binary screening rules into a graded compliance index on a harmonised
firm-month ratio panel, maps the major pass/fail standards onto that scale,
and backtests threshold and tilt portfolios with factor-regression and
cross-sectional analytics.  Runs end to end on deterministic synthetic
inputs.
"""

__version__ = "0.1.0"

from .scoring import ScoreConfig, SectorPolicy, ratio_score, sector_factor, financial_score
from .ratios import RatioVector, compute_ratios, impure_ratio
from .standards import StandardRule, MappingResult, default_standards, fit_tau
from .portfolio import PortfolioSpec, BacktestResult, run_backtest
from .analytics import (
    PerformanceSummary, RegressionReport, FmReport,
    performance_summary, factor_regression, fama_macbeth,
)
from .synthgen import SynthConfig, generate, planted_scenario

__all__ = [
    "ScoreConfig", "SectorPolicy", "ratio_score", "sector_factor", "financial_score",
    "RatioVector", "compute_ratios", "impure_ratio",
    "StandardRule", "MappingResult", "default_standards", "fit_tau",
    "PortfolioSpec", "BacktestResult", "run_backtest",
    "PerformanceSummary", "RegressionReport", "FmReport",
    "performance_summary", "factor_regression", "fama_macbeth",
    "SynthConfig", "generate", "planted_scenario",
]
