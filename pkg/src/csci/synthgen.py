"""Deterministic synthetic input generation.

Produces the full CSV input set (accounting, market, links, factors,
sectors) from a seeded configuration, plus planted scenarios whose ground
truth is known analytically end to end.  All randomness flows through a
single numpy PCG64 generator with a fixed draw order, so a given seed
always yields byte-identical files.

Market months start at ``start_month``; fiscal years end every December,
so accounting for fiscal year Y becomes investable from July of Y+1
through June of Y+2.  The first 18 months of a generated panel are a
warm-up without usable accounting; ``first_scored_month`` in the returned
manifest marks where scores begin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError

CLEAN_CODES = ("2000", "3600")
MIXED_CODE = "5810"
ADJACENT_CODE = "7990"
PROHIBITED_CODE = "6020"

SECTOR_TABLE = [
    {"sector_code": "2000", "category": "clean"},
    {"sector_code": "3600", "category": "clean"},
    {"sector_code": "5810", "category": "mixed"},
    {"sector_code": "7990", "category": "adjacent"},
    {"sector_code": "6020", "category": "prohibited"},
]

# planted scenarios vary only the debt dimension; the rest sit deep in the
# comfort zone so the index reduces to the debt score
_DEBT_COMFORT = 0.30
_DEBT_OUTER = 1.0 / 3.0
_SAFE_RATIOS = {"cash": 0.10, "rec": 0.10, "impure": 0.01}

SCENARIO_KINDS = ("exact_cut", "csci_return_link", "all_pass", "all_fail",
                  "monotone_ratio_grid")


@dataclass
class SynthConfig:
    """Controls for the random panel generator."""

    n_firms: int = 100
    n_months: int = 120
    seed: int = 42
    start_month: str = "2000-01"
    prop_prohibited: float = 0.15
    prop_mixed: float = 0.25
    prop_clean: float = 0.60
    clean_conservative_frac: float = 0.40
    ratio_means: dict = field(default_factory=lambda: {
        "debt": 0.30, "cash": 0.20, "rec": 0.30, "impure": 0.025,
    })
    ratio_disps: dict = field(default_factory=lambda: {
        "debt": 0.15, "cash": 0.12, "rec": 0.15, "impure": 0.02,
    })
    ratio_within_scale: float = 0.25
    beta_range: tuple = (0.5, 1.5)
    idio_vol: float = 0.06
    delist_hazard: float = 0.0
    rf_monthly: float = 0.002

    def __post_init__(self):
        props = (self.prop_prohibited, self.prop_mixed, self.prop_clean)
        if any(p < 0 for p in props) or abs(sum(props) - 1.0) > 1e-9:
            raise ConfigError(f"sector proportions must be >= 0 and sum to 1, got {props}")
        if self.n_firms < 10:
            raise ConfigError("n_firms must be at least 10")
        if self.n_months < 2:
            raise ConfigError("n_months must be at least 2")
        if not (0.0 <= self.delist_hazard < 1.0):
            raise ConfigError("delist_hazard must be in [0, 1)")

    def to_dict(self) -> dict:
        raw = {
            "n_firms": self.n_firms, "n_months": self.n_months, "seed": self.seed,
            "start_month": self.start_month,
            "prop_prohibited": self.prop_prohibited, "prop_mixed": self.prop_mixed,
            "prop_clean": self.prop_clean,
            "clean_conservative_frac": self.clean_conservative_frac,
            "ratio_means": dict(self.ratio_means), "ratio_disps": dict(self.ratio_disps),
            "ratio_within_scale": self.ratio_within_scale,
            "beta_range": list(self.beta_range), "idio_vol": self.idio_vol,
            "delist_hazard": self.delist_hazard, "rf_monthly": self.rf_monthly,
        }
        return raw


def _proportional_counts(total: int, proportions) -> list:
    """Largest-remainder apportionment, deterministic for ties."""
    raw = [p * total for p in proportions]
    counts = [int(np.floor(r)) for r in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False)


def _write_inputs(out_dir, accounting, market, links, factors, sectors) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "accounting": out_dir / "accounting.csv",
        "market": out_dir / "market.csv",
        "links": out_dir / "links.csv",
        "factors": out_dir / "factors.csv",
        "sectors": out_dir / "sectors.csv",
    }
    _write_csv(accounting, paths["accounting"])
    _write_csv(market, paths["market"])
    _write_csv(links, paths["links"])
    _write_csv(factors, paths["factors"])
    _write_csv(sectors, paths["sectors"])
    return {k: str(v) for k, v in paths.items()}


def _identity_links(firm_ids) -> pd.DataFrame:
    return pd.DataFrame({
        "accounting_firm_id": firm_ids,
        "market_firm_id": firm_ids,
        "link_start": "1980-01-01",
        "link_end": "",
        "link_type": "LU",
        "link_primacy": "P",
    })


def _factor_frame(months, rng=None, rf: float = 0.002) -> pd.DataFrame:
    """Factor file for a month range.

    Planted scenarios pass ``rng=None`` and get a fixed-seed stream kept
    separate from the scenario's own draws: deterministic, full-rank
    regressors that never feed back into planted returns.
    """
    n = len(months)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(987_654_321))
    draws = {
        "mkt_rf": rng.normal(0.006, 0.045, n),
        "smb": rng.normal(0.001, 0.020, n),
        "hml": rng.normal(0.001, 0.020, n),
        "rmw": rng.normal(0.0005, 0.015, n),
        "cma": rng.normal(0.0005, 0.015, n),
        "mom": rng.normal(0.002, 0.030, n),
    }
    return pd.DataFrame({"month": [str(m) for m in months], **draws, "rf": rf})


def generate(config: SynthConfig, out_dir) -> dict:
    """Write a full synthetic input set; returns a manifest of paths and facts."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    start = pd.Period(config.start_month, freq="M")
    months = pd.period_range(start, periods=config.n_months, freq="M")
    firm_ids = [f"F{i:05d}" for i in range(1, config.n_firms + 1)]

    n_proh, n_mixed, n_clean = _proportional_counts(
        config.n_firms,
        (config.prop_prohibited, config.prop_mixed, config.prop_clean),
    )
    categories = (["prohibited"] * n_proh + ["mixed"] * n_mixed + ["clean"] * n_clean)
    sector_codes, conservative = [], []
    n_adjacent = n_mixed // 2
    n_conservative = int(round(n_clean * config.clean_conservative_frac))
    mixed_seen = clean_seen = 0
    for cat in categories:
        if cat == "prohibited":
            sector_codes.append(PROHIBITED_CODE)
            conservative.append(False)
        elif cat == "mixed":
            sector_codes.append(ADJACENT_CODE if mixed_seen < n_adjacent else MIXED_CODE)
            mixed_seen += 1
            conservative.append(False)
        else:
            sector_codes.append(CLEAN_CODES[clean_seen % len(CLEAN_CODES)])
            conservative.append(clean_seen < n_conservative)
            clean_seen += 1

    q_values = np.zeros(config.n_firms)
    for i, cat in enumerate(categories):
        if cat == "prohibited":
            q_values[i] = 1.0
        elif cat == "mixed":
            q_values[i] = rng.uniform(0.0, 0.30)

    betas = rng.uniform(config.beta_range[0], config.beta_range[1], config.n_firms)
    prices0 = rng.uniform(5.0, 80.0, config.n_firms)
    shares = rng.integers(1_000, 50_000, config.n_firms).astype(float)
    shrcds = rng.choice([10, 11], config.n_firms)
    exchcds = rng.choice([1, 2, 3], config.n_firms)

    factors = _factor_frame(months, rng=rng, rf=config.rf_monthly)
    mkt = factors["mkt_rf"].to_numpy()

    idio = (rng.normal(0.0, config.idio_vol, (config.n_firms, config.n_months))
            if config.idio_vol > 0 else np.zeros((config.n_firms, config.n_months)))
    rets = config.rf_monthly + betas[:, None] * mkt[None, :] + idio
    rets = np.maximum(rets, -0.95)

    alive_until = np.full(config.n_firms, config.n_months - 1)
    dlrets = np.full(config.n_firms, np.nan)
    if config.delist_hazard > 0:
        hazard_draws = rng.random((config.n_firms, config.n_months))
        dl_draws = rng.uniform(-0.5, -0.05, config.n_firms)
        for i in range(config.n_firms):
            hits = np.nonzero(hazard_draws[i, 12:] < config.delist_hazard)[0]
            if len(hits):
                alive_until[i] = 12 + hits[0]
                dlrets[i] = dl_draws[i]

    prices = prices0[:, None] * np.cumprod(1.0 + rets, axis=1)

    market_rows = []
    for i, firm in enumerate(firm_ids):
        last = alive_until[i]
        for m in range(last + 1):
            dlret = dlrets[i] if (m == last and not np.isnan(dlrets[i])) else ""
            market_rows.append((
                firm, str(months[m]), prices[i, m], rets[i, m], dlret, shares[i],
                sector_codes[i], q_values[i], shrcds[i], exchcds[i],
            ))
    market = pd.DataFrame(market_rows, columns=[
        "firm_id", "month", "prc", "ret", "dlret", "shrout",
        "sector_code", "q", "shrcd", "exchcd",
    ])

    # per-firm persistent ratio levels, yearly wobble on top
    bases = {}
    for dim in ("debt", "cash", "rec", "impure"):
        bases[dim] = rng.normal(config.ratio_means[dim], config.ratio_disps[dim],
                                config.n_firms)
    conservative_draws = {
        "debt": rng.uniform(0.02, 0.27, config.n_firms),
        "cash": rng.uniform(0.02, 0.27, config.n_firms),
        "rec": rng.uniform(0.05, 0.30, config.n_firms),
        "impure": rng.uniform(0.0, 0.015, config.n_firms),
    }

    fye_years = [y for y in range(start.year, months[-1].year + 1)
                 if pd.Period(f"{y}-12", freq="M") <= months[-1]]
    month_pos = {m: i for i, m in enumerate(months)}

    acc_rows = []
    for year in fye_years:
        dec = pd.Period(f"{year}-12", freq="M")
        pos = month_pos[dec]
        sale_mult = rng.uniform(0.4, 1.6, config.n_firms)
        at_mult = rng.uniform(0.6, 2.2, config.n_firms)
        wobble = {dim: rng.normal(0.0, config.ratio_disps[dim] * config.ratio_within_scale,
                                  config.n_firms)
                  for dim in ("debt", "cash", "rec", "impure")}
        for i, firm in enumerate(firm_ids):
            if alive_until[i] < pos:
                continue
            me_fye = prices[i, pos] * shares[i]
            if conservative[i]:
                targets = {dim: conservative_draws[dim][i] for dim in conservative_draws}
            else:
                targets = {dim: max(bases[dim][i] + wobble[dim][i], 0.0)
                           for dim in ("debt", "cash", "rec", "impure")}
            debt = targets["debt"] * me_fye
            cash = targets["cash"] * me_fye
            sale = sale_mult[i] * me_fye
            acc_rows.append((
                firm, f"{year}-12-31",
                0.7 * debt, 0.3 * debt,
                0.6 * cash, 0.2 * cash, 0.2 * cash,
                targets["rec"] * me_fye,
                targets["impure"] * sale, sale,
                at_mult[i] * me_fye,
            ))
    accounting = pd.DataFrame(acc_rows, columns=[
        "firm_id", "fye", "dltt", "dlc", "che", "ivao", "ivst",
        "rect", "impure_income", "sale", "at",
    ])

    paths = _write_inputs(out_dir, accounting, market, _identity_links(firm_ids),
                          factors, pd.DataFrame(SECTOR_TABLE))
    first_scored = pd.Period(f"{start.year + 1}-07", freq="M")
    manifest = {
        "kind": "generate",
        "config": config.to_dict(),
        "paths": paths,
        "first_scored_month": str(first_scored),
        "last_month": str(months[-1]),
        "n_prohibited": n_proh,
    }
    _write_manifest(out_dir, manifest)
    return manifest


def _write_manifest(out_dir, manifest: dict) -> None:
    # the on-disk copy stays relocatable: paths reduce to file names
    disk = dict(manifest)
    for key in ("paths", "rules_path"):
        if key in disk:
            if isinstance(disk[key], dict):
                disk[key] = {k: Path(v).name for k, v in disk[key].items()}
            else:
                disk[key] = Path(disk[key]).name
    with open(Path(out_dir) / "manifest.json", "w") as handle:
        json.dump(disk, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _debt_for_score(csci_target: float) -> float:
    """Debt ratio that yields a given index value when all else is comfortable.

    With equal weights and the other three dimensions at score one, the
    index equals the debt score to the 1/4 power, so the ramp fraction is
    the target squared.
    """
    if csci_target >= 1.0:
        return 0.20
    return _DEBT_OUTER - (_DEBT_OUTER - _DEBT_COMFORT) * csci_target ** 2


def _planted_panel(out_dir, csci_targets, months, fye: str, returns=None,
                   q_values=None, sector_codes=None, rf: float = 0.0,
                   price0: float = 20.0, shares: float = 5000.0):
    """Shared scaffolding: duplicate-firm panel hitting exact index targets.

    Every target appears twice so the 1st/99th percentile winsorisation
    cannot move the extremes.  Returns (manifest fields, paths).
    """
    targets = [t for t in csci_targets for _ in range(2)]
    n = len(targets)
    firm_ids = [f"P{i:04d}" for i in range(1, n + 1)]
    fye_month = pd.Period(fye[:7], freq="M")
    if months[0] > fye_month:
        raise ConfigError("planted months must include the fiscal year-end month")

    if returns is None:
        rets = np.zeros((n, len(months)))
    else:
        rets = np.asarray(returns, dtype=float)
    prices = price0 * np.cumprod(1.0 + rets, axis=1)

    q_values = q_values if q_values is not None else np.zeros(n)
    sector_codes = sector_codes if sector_codes is not None else [CLEAN_CODES[0]] * n

    market_rows = []
    for i, firm in enumerate(firm_ids):
        for m, month in enumerate(months):
            market_rows.append((firm, str(month), prices[i, m], rets[i, m], "",
                                shares, sector_codes[i], q_values[i], 10, 1))
    market = pd.DataFrame(market_rows, columns=[
        "firm_id", "month", "prc", "ret", "dlret", "shrout",
        "sector_code", "q", "shrcd", "exchcd",
    ])

    fye_pos = list(months).index(fye_month)
    acc_rows = []
    for i, firm in enumerate(firm_ids):
        me_fye = prices[i, fye_pos] * shares
        debt = _debt_for_score(targets[i]) * me_fye
        cash = _SAFE_RATIOS["cash"] * me_fye
        sale = me_fye
        acc_rows.append((firm, fye, 0.7 * debt, 0.3 * debt,
                         0.6 * cash, 0.2 * cash, 0.2 * cash,
                         _SAFE_RATIOS["rec"] * me_fye,
                         _SAFE_RATIOS["impure"] * sale, sale, me_fye))
    accounting = pd.DataFrame(acc_rows, columns=[
        "firm_id", "fye", "dltt", "dlc", "che", "ivao", "ivst",
        "rect", "impure_income", "sale", "at",
    ])

    factors = _factor_frame(months, rng=None, rf=rf)
    paths = _write_inputs(out_dir, accounting, market, _identity_links(firm_ids),
                          factors, pd.DataFrame(SECTOR_TABLE))
    return firm_ids, targets, paths


def planted_scenario(kind: str, out_dir, seed: int = 0, **params) -> dict:
    """Build a scenario with analytically known ground truth.

    Kinds: exact_cut (param tau), csci_return_link (params slope, idio_vol),
    all_pass, all_fail, monotone_ratio_grid.
    """
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"unknown scenario kind: {kind!r}")
    out_dir = Path(out_dir)
    builder = {
        "exact_cut": _scenario_exact_cut,
        "csci_return_link": _scenario_return_link,
        "all_pass": _scenario_all_pass,
        "all_fail": _scenario_all_fail,
        "monotone_ratio_grid": _scenario_monotone_grid,
    }[kind]
    manifest = builder(out_dir, seed=seed, **params)
    manifest["kind"] = kind
    _write_manifest(out_dir, manifest)
    return manifest


def _scenario_exact_cut(out_dir, seed: int = 0, tau: float = 0.7,
                        grid_step: float = 0.001) -> dict:
    half = grid_step / 2.0
    if not (0.05 < tau < 0.95):
        raise ConfigError("exact_cut needs tau comfortably inside (0, 1)")
    fails = [0.05, 0.15, 0.25, 0.35, 0.45, max(tau - 0.15, 0.50), tau - half]
    passes = [tau + half, min(tau + 0.10, 0.98), min(tau + 0.20, 0.99), 1.0]
    fails = sorted(set(round(v, 6) for v in fails if 0.0 < v < tau))
    passes = sorted(set(round(v, 6) for v in passes if v >= tau))
    targets = fails + passes

    months = pd.period_range("2019-12", periods=19, freq="M")
    firm_ids, dup_targets, paths = _planted_panel(
        out_dir, targets, months, fye="2019-12-31")

    # a custom one-ratio screen whose debt cap separates the two groups
    cut_debt = 0.5 * (_debt_for_score(passes[0]) + _debt_for_score(fails[-1]))
    rules = {"standards": [{
        "name": "EXACT_CUT", "debt_max": cut_debt, "impure_max": 0.05,
        "q_max": 0.05, "denominator_style": "market_cap",
    }]}
    rules_path = out_dir / "standards.json"
    with open(rules_path, "w") as handle:
        json.dump(rules, handle, indent=2)
        handle.write("\n")

    return {
        "tau": tau,
        "grid_step": grid_step,
        "standard": "EXACT_CUT",
        "rules_path": str(rules_path),
        "paths": paths,
        "csci_by_firm": dict(zip(firm_ids, dup_targets)),
        "first_scored_month": "2020-07",
        "last_month": str(months[-1]),
    }


def _scenario_return_link(out_dir, seed: int = 0, slope: float = 0.01,
                          idio_vol: float = 0.0, n_months: int = 61) -> dict:
    rng = np.random.Generator(np.random.PCG64(seed))
    targets = [round(v, 6) for v in np.linspace(0.02, 1.0, 50)]
    months = pd.period_range("2014-12", periods=n_months, freq="M")

    dup = [t for t in targets for _ in range(2)]
    common = rng.normal(0.0, 0.02, len(months))
    rets = slope * np.asarray(dup)[:, None] + common[None, :]
    if idio_vol > 0:
        rets = rets + rng.normal(0.0, idio_vol, rets.shape)

    firm_ids, dup_targets, paths = _planted_panel(
        out_dir, targets, months, fye="2014-12-31", returns=rets, rf=0.0)
    return {
        "slope": slope,
        "idio_vol": idio_vol,
        "paths": paths,
        "csci_by_firm": dict(zip(firm_ids, dup_targets)),
        "first_scored_month": "2015-07",
        "last_month": str(months[-1]),
    }


def _scenario_all_pass(out_dir, seed: int = 0, n_firms: int = 20) -> dict:
    targets = [1.0] * n_firms  # comfortable on every dimension
    months = pd.period_range("2019-12", periods=37, freq="M")
    firm_ids, dup_targets, paths = _planted_panel(out_dir, targets, months,
                                                  fye="2019-12-31")
    return {"paths": paths, "csci_by_firm": dict(zip(firm_ids, dup_targets)),
            "first_scored_month": "2020-07", "last_month": str(months[-1])}


def _scenario_all_fail(out_dir, seed: int = 0, n_firms: int = 20) -> dict:
    targets = [1.0] * n_firms  # ratios fine; the prohibited sector gates everything
    months = pd.period_range("2019-12", periods=37, freq="M")
    n = 2 * len(targets)
    firm_ids, dup_targets, paths = _planted_panel(
        out_dir, targets, months, fye="2019-12-31",
        q_values=np.ones(n), sector_codes=[PROHIBITED_CODE] * n)
    return {"paths": paths, "csci_by_firm": {f: 0.0 for f in firm_ids},
            "first_scored_month": "2020-07", "last_month": str(months[-1])}


def _scenario_monotone_grid(out_dir, seed: int = 0) -> dict:
    targets = [round(v, 6) for v in np.linspace(0.0, 1.0, 11)]
    months = pd.period_range("2018-12", periods=25, freq="M")
    firm_ids, dup_targets, paths = _planted_panel(out_dir, targets, months,
                                                  fye="2018-12-31")
    return {"paths": paths, "csci_by_firm": dict(zip(firm_ids, dup_targets)),
            "first_scored_month": "2019-07", "last_month": str(months[-1])}
