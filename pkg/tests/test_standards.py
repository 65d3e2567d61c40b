"""Binary standard evaluation and the cut-fitting machinery."""
import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from csci.errors import ConfigError, DegenerateError
from csci.scoring import SectorPolicy
from csci.standards import (
    ONE_THIRD, StandardRule, binary_islamic_indicator, default_standards,
    evaluate_standard, fit_tau, load_standards, map_standards, pass_rate_table,
    trailing_average_me, write_standards,
)

POLICY = SectorPolicy(prohibited=frozenset({"6020"}), adjacent=frozenset({"7990"}))
POLICIES = {"default": POLICY}


def panel_row(firm="A", month="2001-07", lev=0.2, cashr=0.2, rec=0.2, impure=0.01,
              q=0.0, sector="2000", csci=np.nan):
    return {"firm_id": firm, "month": pd.Period(month, freq="M"), "lev": lev,
            "cashr": cashr, "rec": rec, "impure": impure, "q": q,
            "sector_code": sector, "csci": csci, "me": 100.0,
            "debt_num": lev * 100.0, "cash_num": cashr * 100.0, "rec_num": rec * 100.0}


def make_panel(rows):
    return pd.DataFrame(rows)


class TestEvaluateStandard:
    def test_msci_receivables_breach(self):
        rules = default_standards()
        panel = make_panel([panel_row(lev=0.25, cashr=0.20, rec=0.40, impure=0.01)])
        assert not evaluate_standard(rules["MSCI"], panel, POLICIES).iloc[0]

    def test_ftse_tolerates_the_same_firm(self):
        rules = default_standards()
        panel = make_panel([panel_row(lev=0.25, cashr=0.20, rec=0.40, impure=0.01)])
        assert evaluate_standard(rules["FTSE"], panel, POLICIES).iloc[0]

    def test_prohibited_sector_fails_every_standard(self):
        panel = make_panel([panel_row(sector="6020", q=1.0)])
        for rule in default_standards().values():
            assert not evaluate_standard(rule, panel, POLICIES).iloc[0]

    def test_aaoifi_has_no_receivables_screen(self):
        rules = default_standards()
        panel = make_panel([panel_row(lev=0.25, cashr=0.25, rec=0.90, impure=0.01)])
        assert evaluate_standard(rules["AAOIFI"], panel, POLICIES).iloc[0]

    def test_sc_malaysia_two_tier_activity_screen(self):
        rules = default_standards()
        # mixed-sector firm: q under the 20% tier passes, over it fails
        ok = make_panel([panel_row(sector="5810", q=0.15)])
        bad = make_panel([panel_row(sector="5810", q=0.25)])
        assert evaluate_standard(rules["SCMalaysia"], ok, POLICIES).iloc[0]
        assert not evaluate_standard(rules["SCMalaysia"], bad, POLICIES).iloc[0]
        # prohibited-adjacent sector: the 5% tier binds on the same q
        adj_ok = make_panel([panel_row(sector="7990", q=0.04)])
        adj_bad = make_panel([panel_row(sector="7990", q=0.15)])
        assert evaluate_standard(rules["SCMalaysia"], adj_ok, POLICIES).iloc[0]
        assert not evaluate_standard(rules["SCMalaysia"], adj_bad, POLICIES).iloc[0]

    def test_missing_ratio_fails_closed(self):
        rules = default_standards()
        panel = make_panel([panel_row(lev=np.nan)])
        assert not evaluate_standard(rules["DJIM"], panel, POLICIES).iloc[0]

    def test_unknown_sector_policy(self):
        rule = StandardRule(name="X", impure_max=0.05, sector_policy="exotic")
        with pytest.raises(ConfigError, match="unknown sector policy"):
            evaluate_standard(rule, make_panel([panel_row()]), POLICIES)

    def test_djim_msci_identical_pass_sets(self, small_scored):
        rules = default_standards()
        panel = small_scored["panel"]
        policies = {"default": small_scored["policy"]}
        djim = evaluate_standard(rules["DJIM"], panel, policies)
        msci = evaluate_standard(rules["MSCI"], panel, policies)
        assert (djim == msci).all()
        assert djim.sum() > 0

    def test_tightening_shrinks_the_pass_set(self, small_scored):
        panel = small_scored["panel"]
        policies = {"default": small_scored["policy"]}
        loose = StandardRule(name="loose", debt_max=ONE_THIRD, cash_max=ONE_THIRD,
                             rec_max=0.50, impure_max=0.05, q_max=0.05)
        tight = StandardRule(name="tight", debt_max=0.30, cash_max=0.30,
                             rec_max=ONE_THIRD, impure_max=0.04, q_max=0.04)
        pass_loose = evaluate_standard(loose, panel, policies)
        pass_tight = evaluate_standard(tight, panel, policies)
        assert (pass_tight <= pass_loose).all()


class TestBinaryIndicator:
    def test_one_third_rule(self):
        panel = make_panel([
            panel_row(lev=0.30, cashr=0.30, rec=0.30, impure=0.04),
            panel_row(firm="B", lev=0.34),
            panel_row(firm="C", impure=0.06),
        ])
        got = binary_islamic_indicator(panel, POLICIES)
        assert got.tolist() == [True, False, False]


def brute_force_loss(passes, csci, tau):
    fn = np.sum(passes & (csci < tau))
    fp = np.sum(~passes & (csci >= tau))
    return (fn + fp) / len(csci)


class TestFitTau:
    def test_exact_cut_recovery(self):
        rng = np.random.default_rng(0)
        csci = rng.uniform(0, 1, 4000)
        passes = csci >= 0.7
        res = fit_tau(passes, csci)
        assert abs(res.tau - 0.7) <= 0.0005
        assert res.fn_rate == 0.0 and res.fp_rate == 0.0 and res.loss == 0.0

    def test_optimal_against_brute_force_rescan(self):
        rng = np.random.default_rng(1)
        csci = rng.uniform(0, 1, 3000)
        passes = (csci + rng.normal(0, 0.2, 3000)) >= 0.6  # noisy rule
        res = fit_tau(passes, csci)
        best = brute_force_loss(passes, csci, res.tau)
        assert best == pytest.approx(res.loss, abs=1e-12)
        for tau in rng.choice(np.linspace(0, 1, 1001), size=100, replace=False):
            assert best <= brute_force_loss(passes, csci, tau) + 1e-12

    def test_random_pass_indicator_loss_near_base_rate(self):
        rng = np.random.default_rng(2)
        csci = rng.uniform(0, 0.95, 20000)
        passes = rng.random(20000) < 0.3
        res = fit_tau(passes, csci)
        assert res.loss <= 0.3 + 1e-12
        assert res.loss == pytest.approx(0.3, abs=0.02)

    def test_smallest_tau_tie_break(self):
        # zero loss everywhere in (0.4, 0.6]; the grid picks 0.401
        csci = np.array([0.2, 0.2, 0.4, 0.6, 0.8, 0.9])
        passes = np.array([False, False, False, True, True, True])
        res = fit_tau(passes, csci, grid_step=0.001)
        assert res.tau == pytest.approx(0.401, abs=1e-12)
        assert res.loss == 0.0

    def test_degenerate_all_pass(self):
        with pytest.raises(DegenerateError, match="all observations pass"):
            fit_tau(np.ones(10, dtype=bool), np.linspace(0, 1, 10))

    def test_degenerate_all_fail(self):
        with pytest.raises(DegenerateError, match="all observations fail"):
            fit_tau(np.zeros(10, dtype=bool), np.linspace(0, 1, 10))

    def test_missing_csci_excluded_and_counted(self):
        csci = np.array([0.1, 0.9, np.nan, np.nan, 0.2, 0.8])
        passes = np.array([False, True, True, False, False, True])
        res = fit_tau(passes, csci)
        assert res.n_missing == 2 and res.n_obs == 4
        assert res.fn_rate == 0.0 and res.fp_rate == 0.0

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=15, deadline=None)
    def test_returned_loss_is_grid_minimal(self, seed):
        rng = np.random.default_rng(seed)
        n = 400
        csci = rng.uniform(0, 1, n)
        passes = rng.random(n) < np.clip(csci, 0.05, 0.95)
        if passes.all() or not passes.any():
            return
        res = fit_tau(passes, csci, grid_step=0.01)
        for tau in np.linspace(0, 1, 101):
            assert res.loss <= brute_force_loss(passes, csci, tau) + 1e-12


class TestPassRates:
    def test_all_pass_fraction_one(self):
        panel = make_panel([panel_row(), panel_row(firm="B")])
        summary, annual = pass_rate_table({"AAOIFI": default_standards()["AAOIFI"]},
                                          panel, POLICIES)
        assert summary["fraction"].iloc[0] == 1.0
        assert annual["pass_rate"].iloc[0] == 1.0

    def test_half_and_half(self):
        panel = make_panel([panel_row(), panel_row(firm="B", lev=0.9)])
        summary, _ = pass_rate_table({"DJIM": default_standards()["DJIM"]},
                                     panel, POLICIES)
        assert summary["fraction"].iloc[0] == 0.5

    def test_annual_mean_matches_by_hand(self):
        panel = make_panel([
            panel_row(month="2001-07"), panel_row(firm="B", month="2001-07", lev=0.9),
            panel_row(month="2002-07"), panel_row(firm="B", month="2002-07"),
        ])
        summary, annual = pass_rate_table({"DJIM": default_standards()["DJIM"]},
                                          panel, POLICIES)
        assert annual.set_index("year")["pass_rate"].to_dict() == {2001: 0.5, 2002: 1.0}
        assert summary["annual_mean"].iloc[0] == pytest.approx(0.75)

    def test_empty_panel_raises(self):
        from csci.errors import DataError
        with pytest.raises(DataError):
            pass_rate_table(default_standards(), make_panel([]).reindex(columns=["month"]),
                            POLICIES)


class TestRulesFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "standards.json"
        write_standards(default_standards(), path)
        rules = load_standards(path)
        assert set(rules) == {"AAOIFI", "DJIM", "MSCI", "FTSE", "SP", "SCMalaysia"}
        assert rules["DJIM"].rec_max == pytest.approx(ONE_THIRD)

    def test_custom_rule_names_allowed(self, tmp_path):
        path = tmp_path / "custom.json"
        path.write_text(json.dumps({"standards": [
            {"name": "HOUSE_RULE", "debt_max": 0.25, "impure_max": 0.05, "q_max": 0.05},
        ]}))
        rules = load_standards(path)
        assert rules["HOUSE_RULE"].debt_max == 0.25

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"standards": [
            {"name": "X", "impure_max": 0.05, "debt_limit": 0.3},
        ]}))
        with pytest.raises(ConfigError, match="unknown keys"):
            load_standards(path)

    def test_threshold_out_of_range(self):
        with pytest.raises(ConfigError):
            StandardRule(name="X", impure_max=0.05, debt_max=1.5)


class TestTrailingVariant:
    def test_trailing_average_by_hand(self):
        panel = make_panel([panel_row(month=m) for m in ("2001-07", "2001-08", "2001-09")])
        panel["me"] = [100.0, 200.0, 300.0]
        got = trailing_average_me(panel, window=2)
        assert np.isnan(got.iloc[0])
        assert got.iloc[1] == 150.0 and got.iloc[2] == 250.0

    def test_variant_changes_the_denominator(self):
        rows = [panel_row(month=m, lev=0.32) for m in ("2001-07", "2001-08")]
        panel = make_panel(rows)
        panel["me"] = [100.0, 50.0]  # crash halves trailing ME below spot
        rule = default_standards()["DJIM"]
        unified = evaluate_standard(rule, panel, POLICIES)
        trailing = evaluate_standard(
            StandardRule(**{**rule.to_dict(), "trailing_window": 2}), panel, POLICIES,
            use_trailing_me=True,
        )
        assert unified.tolist() == [True, True]
        # debt_num 32 against trailing ME 75 breaches one third
        assert trailing.tolist() == [False, False]


class TestMapStandards:
    def test_one_row_per_standard(self, small_scored):
        panel = small_scored["panel"]
        policies = {"default": small_scored["policy"]}
        table = map_standards(default_standards(), panel, policies)
        assert len(table) == 6
        assert set(table["standard"]) == set(default_standards())
        assert ((table["tau"] >= 0) & (table["tau"] <= 1)).all()
