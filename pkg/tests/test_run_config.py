"""
@File       : test_run_config.py
@Description: YAML 运行配置：校验、默认值、覆盖项与规范化输出.

@Time       : 2026/01/17 17:05
@Author     : hcy18
"""
from pathlib import Path

import pytest

from covsaa.config.run_config import (
    RunConfig,
    dump_run_config,
    load_run_config,
    parse_run_config,
    with_overrides,
)
from covsaa.config.settings import Settings
from covsaa.errors import ConfigError
from covsaa.utils.seeding import Stream, derive_seed

REPO_ROOT = Path(__file__).resolve().parents[1]


def test_defaults_when_no_file():
    config = load_run_config(None)
    assert config.instance.n_resources == 20
    assert config.evaluation.t_multiplier == pytest.approx(2.462)
    assert config.solver.algorithm == "lshaped"
    assert config.output.path("results_csv") == Path("out") / "results.csv"


@pytest.mark.parametrize("document", [
    {"instance": {"n_resource": 3}},
    {"surprise": {}},
    {"demand": {"omega": 4}},
    {"demand": {"degree": 3}},
    {"covariates": {"d_x": 2}},
    {"experiment": {"methods": ["er_ols", "er_ols"]}},
    {"experiment": {"methods": ["quantile"]}},
    {"experiment": {"n_grid": []}},
    {"evaluation": {"n_batches": 1}},
    {"solver": {"algorithm": "gurobi"}},
])
def test_invalid_documents_raise_config_error(document):
    with pytest.raises(ConfigError) as info:
        parse_run_config(document)
    assert info.value.exit_code == 2


def test_non_mapping_document():
    with pytest.raises(ConfigError):
        parse_run_config([1, 2, 3])


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("instance: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)


def test_dump_then_load_is_stable(tmp_path):
    config = parse_run_config({"demand": {"omega": 2, "degree": 0.5}, "experiment": {"n_grid": [15, 30]}})
    path = tmp_path / "canonical.yaml"
    text = dump_run_config(config, path)
    reloaded = load_run_config(path)
    assert reloaded == config
    assert dump_run_config(reloaded) == text


def test_overrides():
    config = parse_run_config({"experiment": {"project_overrides": {"n_saa": True}}})
    updated = with_overrides(config, seed=5, threads=3, no_project=True)
    assert updated.experiment.master_seed == 5
    assert updated.experiment.threads == 3
    assert not updated.experiment.project_for("n_saa")
    assert config.experiment.master_seed != 5
    with pytest.raises(ConfigError):
        with_overrides(config, threads=0)


def test_project_overrides_per_method():
    config = parse_run_config({"experiment": {"project": True, "project_overrides": {"er_ols": False}}})
    assert not config.experiment.project_for("er_ols")
    assert config.experiment.project_for("j_ols")


def test_seed_derivation():
    config = parse_run_config({"experiment": {"master_seed": 42}, "demand": {"seed": 9}})
    assert config.instance_seed() == derive_seed(42, Stream.INSTANCE)
    assert config.demand_seed() == 9
    assert config.covariate_seed() != config.instance_seed()


def test_experiment_config_drops_output():
    config = RunConfig()
    experiment = config.experiment_config()
    assert not hasattr(experiment, "output")
    assert experiment.experiment == config.experiment


@pytest.mark.parametrize("name", ["example_run_config.yaml", "configs/smoke.yaml", "configs/consistency.yaml",
                                  "configs/jackknife.yaml"])
def test_shipped_configs_are_valid(name):
    config = load_run_config(REPO_ROOT / name)
    assert config.experiment.methods


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("COVSAA_THREADS", "4")
    monkeypatch.setenv("COVSAA_LSHAPED_TOL", "1e-8")
    settings = Settings()
    assert settings.threads == 4
    assert settings.lshaped_tol == pytest.approx(1e-8)
