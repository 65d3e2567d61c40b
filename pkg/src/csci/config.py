"""Run configuration shared by all CLI subcommands.

One JSON file drives the whole pipeline; command-line flags override
individual keys.  Every output file carries a header comment with the
pipeline version and a hash of the effective configuration so runs are
reproducible and attributable.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from . import __version__
from .analytics import DEFAULT_HAC_LAGS, FACTOR_NAMES
from .errors import ConfigError
from .portfolio import PortfolioSpec, DEFAULT_COST_RATE
from .ratios import DEFAULT_CAP, MARKET_CAP, TOTAL_ASSETS
from .scoring import ScoreConfig

FM_CONTROL_NAMES = frozenset({"log_me", "past_ret"})

DEFAULT_PORTFOLIOS = (
    {"kind": "market"},
    {"kind": "binary_islamic"},
    {"kind": "threshold", "tau": 0.5},
    {"kind": "threshold", "tau": 0.7},
    {"kind": "threshold", "tau": 0.8},
    {"kind": "threshold", "tau": 0.9},
    {"kind": "tilt", "tilt_exponent": 1.0},
)


@dataclass
class RunConfig:
    accounting: str = "accounting.csv"
    market: str = "market.csv"
    links: str = "links.csv"
    factors: str = "factors.csv"
    sectors: str = "sectors.csv"
    output_dir: str = "out"
    date_start: str = None
    date_end: str = None
    denominator_style: str = MARKET_CAP
    ratio_cap: float = DEFAULT_CAP
    score: ScoreConfig = field(default_factory=ScoreConfig)
    standards_path: str = None
    portfolios: list = field(default_factory=lambda: [dict(p) for p in DEFAULT_PORTFOLIOS])
    cost_rate: float = DEFAULT_COST_RATE
    grid_step: float = 0.001
    hac_lags: int = DEFAULT_HAC_LAGS
    factor_subset: list = field(default_factory=lambda: list(FACTOR_NAMES))
    fm_controls: list = field(default_factory=lambda: ["log_me"])
    export_weights: bool = False
    min_price: float = None  # optional liquidity screen; off by default

    def __post_init__(self):
        if self.denominator_style not in (MARKET_CAP, TOTAL_ASSETS):
            raise ConfigError(f"unknown denominator_style: {self.denominator_style!r}")
        if not (0.0 < self.grid_step <= 0.5):
            raise ConfigError("grid_step must be in (0, 0.5]")
        if self.hac_lags < 0:
            raise ConfigError("hac_lags must be >= 0")
        if self.ratio_cap <= 0:
            raise ConfigError("ratio_cap must be positive")
        for name in self.factor_subset:
            if name not in FACTOR_NAMES:
                raise ConfigError(f"unknown factor: {name!r}")
        for name in self.fm_controls:
            if name not in FM_CONTROL_NAMES:
                raise ConfigError(
                    f"unknown cross-section control: {name!r} (have {sorted(FM_CONTROL_NAMES)})"
                )
        for raw in self.portfolios:
            PortfolioSpec.from_dict({**raw, "cost_rate": raw.get("cost_rate", self.cost_rate)})
        for bound in (self.date_start, self.date_end):
            if bound is not None:
                try:
                    pd.Period(bound, freq="M")
                except Exception as exc:
                    raise ConfigError(f"bad month {bound!r}: {exc}")

    @property
    def period_start(self):
        return pd.Period(self.date_start, freq="M") if self.date_start else None

    @property
    def period_end(self):
        return pd.Period(self.date_end, freq="M") if self.date_end else None

    def specs(self) -> list:
        return [
            PortfolioSpec.from_dict({**raw, "cost_rate": raw.get("cost_rate", self.cost_rate)})
            for raw in self.portfolios
        ]

    def to_dict(self) -> dict:
        return {
            "accounting": self.accounting, "market": self.market, "links": self.links,
            "factors": self.factors, "sectors": self.sectors,
            "output_dir": self.output_dir,
            "date_start": self.date_start, "date_end": self.date_end,
            "denominator_style": self.denominator_style, "ratio_cap": self.ratio_cap,
            "score": self.score.to_dict(), "standards_path": self.standards_path,
            "portfolios": [dict(p) for p in self.portfolios],
            "cost_rate": self.cost_rate, "grid_step": self.grid_step,
            "hac_lags": self.hac_lags, "factor_subset": list(self.factor_subset),
            "fm_controls": list(self.fm_controls),
            "export_weights": self.export_weights,
            "min_price": self.min_price,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "score" in kwargs and isinstance(kwargs["score"], dict):
            kwargs["score"] = ScoreConfig.from_dict(kwargs["score"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as handle:
                raw = json.load(handle)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def require_inputs(self) -> None:
        for label in ("accounting", "market", "links", "factors"):
            path = getattr(self, label)
            if not Path(path).exists():
                raise ConfigError(f"{label} input does not exist: {path}")


def output_header(config: RunConfig) -> str:
    return f"# csci-pipeline v{__version__} config={config.config_hash()}"


def write_output(frame: pd.DataFrame, path, config: RunConfig,
                 float_format: str = None) -> None:
    """Write a CSV with the version/config header comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        handle.write(output_header(config) + "\n")
        frame.to_csv(handle, index=False, float_format=float_format)
