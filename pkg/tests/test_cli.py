"""CLI subcommands: files produced, exit codes, idempotent outputs."""
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from csci.cli import main
from csci.synthgen import planted_scenario


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic inputs plus a run config, built through the CLI itself."""
    root = tmp_path_factory.mktemp("cli_ws")
    inputs = root / "inputs"
    assert main(["synth", "--out", str(inputs), "--seed", "42",
                 "--n-firms", "40", "--n-months", "60"]) == 0
    config = {
        "accounting": str(inputs / "accounting.csv"),
        "market": str(inputs / "market.csv"),
        "links": str(inputs / "links.csv"),
        "factors": str(inputs / "factors.csv"),
        "sectors": str(inputs / "sectors.csv"),
        "output_dir": str(root / "out"),
        "date_start": "2001-07",
        "portfolios": [
            {"kind": "market"},
            {"kind": "threshold", "tau": 0.5},
            {"kind": "threshold", "tau": 0.9},
            {"kind": "tilt", "tilt_exponent": 1.0},
        ],
    }
    config_path = root / "run.json"
    config_path.write_text(json.dumps(config, indent=2))
    return {"root": root, "config": str(config_path), "out": root / "out"}


def read_output(path):
    return pd.read_csv(path, comment="#")


class TestScore:
    def test_writes_records_and_distribution(self, workspace):
        assert main(["score", "--config", workspace["config"]]) == 0
        out = workspace["out"]
        records = read_output(out / "csci.csv")
        assert set(records.columns) >= {"firm_id", "month", "csci", "b_sector"}
        assert (out / "distribution.csv").exists()
        assert (out / "panel.csv").exists()
        ratios = read_output(out / "ratios.csv")
        assert list(ratios.columns) == ["firm_id", "fye", "lev", "cashr", "rec",
                                        "impure", "style", "valid_flag", "reason"]

    def test_header_carries_version_and_hash(self, workspace):
        first_line = (workspace["out"] / "csci.csv").read_text().splitlines()[0]
        assert first_line.startswith("# csci-pipeline v")
        assert "config=" in first_line

    def test_rerun_is_byte_identical(self, workspace):
        out = workspace["out"] / "csci.csv"
        before = out.read_bytes()
        assert main(["score", "--config", workspace["config"]]) == 0
        assert out.read_bytes() == before


class TestMap:
    def test_writes_pass_rates_and_mapping(self, workspace):
        assert main(["map", "--config", workspace["config"]]) == 0
        out = workspace["out"]
        mapping = read_output(out / "tau_mapping.csv")
        assert set(mapping.columns) == {"standard", "tau", "loss", "fn_rate", "fp_rate",
                                        "compliant_fraction", "avg_csci_compliant",
                                        "n_obs", "n_missing"}
        assert len(mapping) == 6
        rates = read_output(out / "pass_rates.csv")
        assert {"standard", "fraction", "annual_mean"} == set(rates.columns)
        assert (out / "pass_rates_annual.csv").exists()

    def test_exact_cut_scenario_recovers_tau(self, tmp_path):
        manifest = planted_scenario("exact_cut", tmp_path / "cut", tau=0.7)
        paths = manifest["paths"]
        config = {
            "accounting": paths["accounting"], "market": paths["market"],
            "links": paths["links"], "factors": paths["factors"],
            "sectors": paths["sectors"],
            "output_dir": str(tmp_path / "out"),
            "date_start": manifest["first_scored_month"],
            "standards_path": manifest["rules_path"],
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["map", "--config", str(cfg_path)]) == 0
        mapping = read_output(tmp_path / "out" / "tau_mapping.csv")
        row = mapping.set_index("standard").loc["EXACT_CUT"]
        assert abs(row["tau"] - 0.7) <= 0.0005
        assert row["fn_rate"] == 0.0 and row["fp_rate"] == 0.0

    def test_all_pass_degeneracy_surfaces_as_exit_code(self, tmp_path):
        manifest = planted_scenario("all_pass", tmp_path / "ap")
        paths = manifest["paths"]
        config = {
            "accounting": paths["accounting"], "market": paths["market"],
            "links": paths["links"], "factors": paths["factors"],
            "sectors": paths["sectors"], "output_dir": str(tmp_path / "out"),
            "date_start": manifest["first_scored_month"],
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["map", "--config", str(cfg_path)]) == 4


class TestBacktest:
    def test_empty_universe_spec_skipped_others_continue(self, tmp_path):
        # every firm sector-prohibited: the binary screen has no members,
        # but the market benchmark still runs
        manifest = planted_scenario("all_fail", tmp_path / "af")
        paths = manifest["paths"]
        config = {
            "accounting": paths["accounting"], "market": paths["market"],
            "links": paths["links"], "factors": paths["factors"],
            "sectors": paths["sectors"], "output_dir": str(tmp_path / "out"),
            "date_start": manifest["first_scored_month"],
            "portfolios": [{"kind": "market"}, {"kind": "binary_islamic"}],
        }
        cfg_path = tmp_path / "bt.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["backtest", "--config", str(cfg_path)]) == 0
        perf = read_output(tmp_path / "out" / "performance.csv")
        assert perf["label"].tolist() == ["market"]
        assert not (tmp_path / "out" / "backtest_binary_islamic.csv").exists()

    def test_weights_snapshots_on_demand(self, workspace, tmp_path):
        config = json.loads(Path(workspace["config"]).read_text())
        config["export_weights"] = True
        config["output_dir"] = str(tmp_path / "wout")
        config["portfolios"] = [{"kind": "threshold", "tau": 0.5}]
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(config))
        assert main(["backtest", "--config", str(cfg_path)]) == 0
        snaps = read_output(tmp_path / "wout" / "weights_threshold_0.5.csv")
        assert set(snaps.columns) == {"month", "firm_id", "weight"}
        sums = snaps.groupby("month")["weight"].sum()
        assert np.allclose(sums, 1.0)

    def test_one_file_per_spec_plus_frontier(self, workspace):
        assert main(["backtest", "--config", workspace["config"]]) == 0
        out = workspace["out"]
        for label in ("market", "threshold_0.5", "threshold_0.9", "tilt_1"):
            assert (out / f"backtest_{label}.csv").exists()
        frontier = read_output(out / "frontier.csv")
        assert len(frontier) == 4
        assert frontier["avg_csci"].is_monotonic_increasing
        perf = read_output(out / "performance.csv")
        assert len(perf) == 4

    def test_net_never_exceeds_gross_under_positive_turnover(self, workspace):
        frame = read_output(workspace["out"] / "backtest_threshold_0.5.csv")
        trading = frame[frame["turnover"] > 0]
        assert (trading["net"] <= trading["gross"]).all()

    def test_threshold_family_breadth_shrinks(self, workspace):
        loose = read_output(workspace["out"] / "backtest_threshold_0.5.csv")
        tight = read_output(workspace["out"] / "backtest_threshold_0.9.csv")
        assert (tight["n_stocks"].to_numpy() <= loose["n_stocks"].to_numpy()).all()


class TestFm:
    def test_report_includes_months_and_both_specs(self, workspace):
        assert main(["fm", "--config", workspace["config"]]) == 0
        table = read_output(workspace["out"] / "fm.csv")
        assert set(table["spec"]) == {"csci_only", "csci_controls"}
        assert (table["n_months"] > 0).all()

    def test_extra_controls_by_flag(self, workspace):
        assert main(["fm", "--config", workspace["config"],
                     "--fm-controls", "log_me,past_ret"]) == 0
        table = read_output(workspace["out"] / "fm.csv")
        controls = set(table.loc[table["spec"] == "csci_controls", "regressor"])
        assert controls == {"intercept", "csci", "log_me", "past_ret"}

    def test_unknown_control_is_config_error(self, workspace):
        assert main(["fm", "--config", workspace["config"],
                     "--fm-controls", "beta"]) == 2


class TestReport:
    def test_decile_table_written(self, workspace):
        assert main(["report", "--config", workspace["config"]]) == 0
        table = read_output(workspace["out"] / "deciles.csv")
        assert "decile" in table.columns
        assert set(table.columns) >= {"csci", "log_me", "lev", "cashr", "rec", "impure"}


class TestErrors:
    def test_missing_config_file(self):
        assert main(["score", "--config", "/nonexistent/run.json"]) == 2

    def test_missing_inputs_is_config_error(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"accounting": "/nope.csv", "output_dir": str(tmp_path)}))
        assert main(["score", "--config", cfg.as_posix()]) == 2

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"acounting": "typo.csv"}))
        assert main(["score", "--config", cfg.as_posix()]) == 2

    def test_empty_date_range_is_data_error(self, workspace):
        assert main(["score", "--config", workspace["config"],
                     "--date-start", "2050-01"]) == 3

    def test_flag_overrides_config_key(self, workspace, tmp_path):
        other = tmp_path / "other_out"
        assert main(["score", "--config", workspace["config"],
                     "--output-dir", str(other)]) == 0
        assert (other / "csci.csv").exists()
