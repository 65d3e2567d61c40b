"""Shared fixtures: small synthetic input sets and scored panels."""
import pytest

from csci.config import RunConfig
from csci.pipeline import run_scoring
from csci.synthgen import SynthConfig, generate


def config_for(manifest, **overrides):
    """Run config pointing at a generated input set."""
    paths = manifest["paths"]
    kwargs = dict(
        accounting=paths["accounting"],
        market=paths["market"],
        links=paths["links"],
        factors=paths["factors"],
        sectors=paths["sectors"],
        date_start=manifest.get("first_scored_month"),
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


@pytest.fixture(scope="session")
def small_inputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("small_inputs")
    return generate(SynthConfig(n_firms=40, n_months=60, seed=7), out)


@pytest.fixture(scope="session")
def small_scored(small_inputs):
    scored, policy, loaded, reports = run_scoring(config_for(small_inputs))
    return {"panel": scored, "policy": policy, "loaded": loaded, "reports": reports}


@pytest.fixture(scope="session")
def delisting_inputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("delist_inputs")
    return generate(SynthConfig(n_firms=30, n_months=48, seed=11, delist_hazard=0.03), out)
