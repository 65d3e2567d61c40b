"""Command-line entry points.

Subcommands: synth, score, map, backtest, fm, report.  A single JSON run
config drives everything; flags override file keys.  Outputs are CSVs with
a version/config-hash header and are byte-identical across reruns on
unchanged inputs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical or
degeneracy error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analytics import (
    decile_table, distribution_summary, factor_regression, fama_macbeth,
    frontier_table, performance_summary,
)
from .config import RunConfig, write_output
from .errors import ConfigError, DataError, DegenerateError
from .panel import panel_records
from .pipeline import fm_frame, run_scoring
from .portfolio import run_backtest
from .scoring import csci_records
from .standards import default_standards, load_standards, map_standards, pass_rate_table
from .synthgen import SynthConfig, generate, planted_scenario

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

OVERRIDE_KEYS = ("accounting", "market", "links", "factors", "sectors",
                 "output_dir", "date_start", "date_end", "denominator_style",
                 "standards_path")


def _build_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig()
    raw = config.to_dict()
    for key in OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    return RunConfig.from_dict(raw)


def _standards(config: RunConfig) -> dict:
    if config.standards_path:
        return load_standards(config.standards_path)
    return default_standards()


def _out(config: RunConfig, name: str) -> Path:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def cmd_synth(args) -> int:
    if args.scenario:
        manifest = planted_scenario(args.scenario, args.out, seed=args.seed,
                                    **_scenario_params(args))
    else:
        cfg = SynthConfig(n_firms=args.n_firms, n_months=args.n_months,
                          seed=args.seed, start_month=args.start_month,
                          delist_hazard=args.delist_hazard,
                          idio_vol=args.idio_vol)
        manifest = generate(cfg, args.out)
    for label, path in manifest["paths"].items():
        print(f"wrote {label}: {path}")
    print(f"first scored month: {manifest.get('first_scored_month')}")
    return 0


def _scenario_params(args) -> dict:
    params = {}
    if args.tau is not None:
        params["tau"] = args.tau
    if args.slope is not None:
        params["slope"] = args.slope
    if args.scenario_idio_vol is not None:
        params["idio_vol"] = args.scenario_idio_vol
    return params


def cmd_score(args) -> int:
    config = _build_config(args)
    scored, _, _, reports = run_scoring(config)
    write_output(csci_records(scored), _out(config, "csci.csv"), config)
    write_output(panel_records(scored), _out(config, "panel.csv"), config)
    write_output(_ratio_view(scored, config), _out(config, "ratios.csv"), config)
    dist = distribution_summary(scored)
    write_output(dist, _out(config, "distribution.csv"), config)
    print(f"scored {len(scored)} firm-months "
          f"({scored['csci'].notna().sum()} with an index value)")
    print(dist.to_string(index=False))
    for stage, report in reports.items():
        print(f"{stage}: {report}")
    return 0


def _ratio_view(scored, config: RunConfig):
    view = (scored.loc[scored["has_accounting"],
                       ["firm_id", "fye", "lev", "cashr", "rec", "impure",
                        "valid", "reason"]]
            .drop_duplicates(subset=["firm_id", "fye"])
            .rename(columns={"valid": "valid_flag"})
            .copy())
    view["style"] = config.denominator_style
    view["fye"] = view["fye"].dt.strftime("%Y-%m-%d")
    view = view[["firm_id", "fye", "lev", "cashr", "rec", "impure",
                 "style", "valid_flag", "reason"]]
    return view.sort_values(["firm_id", "fye"], kind="mergesort").reset_index(drop=True)


def cmd_map(args) -> int:
    config = _build_config(args)
    scored, policy, _, _ = run_scoring(config)
    rules = _standards(config)
    policies = {"default": policy}
    summary, annual = pass_rate_table(rules, scored, policies=policies)
    write_output(summary, _out(config, "pass_rates.csv"), config)
    write_output(annual, _out(config, "pass_rates_annual.csv"), config)
    mapping = map_standards(rules, scored, policies=policies, grid_step=config.grid_step)
    write_output(mapping, _out(config, "tau_mapping.csv"), config)
    print(mapping.to_string(index=False))
    return 0


def cmd_backtest(args) -> int:
    config = _build_config(args)
    scored, policy, loaded, _ = run_scoring(config)
    policies = {"default": policy}
    factors = loaded.factors.set_index("month")

    perf_rows, frontier_rows = [], []
    for spec in config.specs():
        try:
            result = run_backtest(spec, scored, policies=policies,
                                  keep_weights=config.export_weights)
        except DegenerateError as exc:
            print(f"skipped {spec.label}: {exc}", file=sys.stderr)
            continue
        write_output(result.frame(), _out(config, f"backtest_{result.label}.csv"), config)
        if config.export_weights:
            snaps = pd.concat(
                [pd.DataFrame({"month": month, "firm_id": w.index, "weight": w.values})
                 for month, w in result.weights.items()],
                ignore_index=True,
            )
            write_output(snaps, _out(config, f"weights_{result.label}.csv"), config)

        month_index = pd.PeriodIndex(result.months, freq="M")
        if not month_index.isin(factors.index).all():
            raise DataError(f"{result.label}: factor series does not cover all backtest months")
        rf = factors.loc[month_index, "rf"].to_numpy(dtype=float)
        summary = performance_summary(result.net, rf)
        regression = factor_regression(
            result.net - rf, factors.loc[month_index],
            hac_lags=config.hac_lags, factor_names=config.factor_subset,
        )
        avg_csci = float(np.nanmean(result.characteristics["w_csci"]))
        perf_rows.append({
            "label": result.label,
            "mean_excess_ann": summary.mean_excess_ann,
            "vol_ann": summary.vol_ann,
            "sharpe": summary.sharpe,
            "sortino": summary.sortino,
            "alpha_monthly": regression.alpha_monthly,
            "alpha_ann": regression.alpha_annualized,
            "t_alpha": regression.t_stats["alpha"],
            "r_squared": regression.r_squared,
            "max_drawdown": summary.max_drawdown,
            "avg_turnover": float(result.turnover.mean()),
            "n_months": summary.n_months,
        })
        frontier_rows.append({
            "label": result.label, "avg_csci": avg_csci, "sharpe": summary.sharpe,
            "alpha_ann": regression.alpha_annualized,
            "max_drawdown": summary.max_drawdown,
        })
    if not perf_rows:
        raise DegenerateError("every portfolio spec aborted")
    write_output(pd.DataFrame(perf_rows), _out(config, "performance.csv"), config)
    write_output(frontier_table(frontier_rows), _out(config, "frontier.csv"), config)
    print(pd.DataFrame(perf_rows).to_string(index=False))
    return 0


def cmd_fm(args) -> int:
    config = _build_config(args)
    if getattr(args, "fm_controls", None) is not None:
        raw = config.to_dict()
        raw["fm_controls"] = [c for c in args.fm_controls.split(",") if c]
        config = RunConfig.from_dict(raw)
    scored, _, loaded, _ = run_scoring(config)
    data = fm_frame(scored, loaded.factors, controls=config.fm_controls)

    specs = [("csci_only", ["csci"])]
    if config.fm_controls:
        specs.append(("csci_controls", ["csci"] + list(config.fm_controls)))
    rows = []
    for label, regressors in specs:
        report = fama_macbeth(data, regressors=regressors)
        for name in report.regressors:
            rows.append({
                "spec": label, "regressor": name,
                "mean_slope": report.mean_slopes[name],
                "t_stat": report.t_stats[name],
                "n_months": report.n_months, "n_skipped": report.n_skipped,
            })
    table = pd.DataFrame(rows)
    write_output(table, _out(config, "fm.csv"), config)
    print(table.to_string(index=False))
    return 0


def cmd_report(args) -> int:
    config = _build_config(args)
    scored, _, _, _ = run_scoring(config)
    table, diagnostics = decile_table(scored)
    write_output(table, _out(config, "deciles.csv"), config)
    write_output(distribution_summary(scored), _out(config, "distribution.csv"), config)
    for note in diagnostics[:10]:
        print(f"note: {note}", file=sys.stderr)
    print(table.to_string(index=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csci",
        description="Continuous compliance scoring, standard mapping, and backtests.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate synthetic inputs or a planted scenario")
    synth.add_argument("--out", required=True, help="output directory for the input set")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--n-firms", type=int, default=100, dest="n_firms")
    synth.add_argument("--n-months", type=int, default=120, dest="n_months")
    synth.add_argument("--start-month", default="2000-01", dest="start_month")
    synth.add_argument("--delist-hazard", type=float, default=0.0, dest="delist_hazard")
    synth.add_argument("--idio-vol", type=float, default=0.06, dest="idio_vol")
    synth.add_argument("--scenario", choices=["exact_cut", "csci_return_link",
                                              "all_pass", "all_fail",
                                              "monotone_ratio_grid"])
    synth.add_argument("--tau", type=float, default=None)
    synth.add_argument("--slope", type=float, default=None)
    synth.add_argument("--scenario-idio-vol", type=float, default=None,
                       dest="scenario_idio_vol")
    synth.set_defaults(func=cmd_synth)

    for name, func, help_text in (
        ("score", cmd_score, "score the panel and export index records"),
        ("map", cmd_map, "pass rates and index-cut mapping per standard"),
        ("backtest", cmd_backtest, "run the configured portfolio backtests"),
        ("fm", cmd_fm, "cross-sectional regressions of next-month returns"),
        ("report", cmd_report, "decile characteristics and index distribution"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="JSON run config; flags override its keys")
        for key in OVERRIDE_KEYS:
            cmd.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
        if name == "fm":
            cmd.add_argument("--fm-controls", dest="fm_controls", default=None,
                             help="comma-separated controls, e.g. log_me,past_ret")
        cmd.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateError as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
