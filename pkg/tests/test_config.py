import json
from importlib import resources

import numpy as np
import pytest
import yaml

from martdim.config import (ExperimentConfig, config_from_dict, default_config, json_schema,
                            load_config, random_constant, with_overrides)
from martdim.errors import ConfigError
from martdim.paths import generate_brownian, make_grid
from martdim.rank_dim import numerical_rank


def test_default_yaml_matches_model_defaults():
    assert default_config() == ExperimentConfig()


def test_shipped_schema_is_current():
    shipped = json.loads(resources.files("martdim").joinpath("data/config.schema.json").read_text())
    assert shipped == json_schema()


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"grid": {"N": 8, "bogus": 1}})
    assert err.value.key == "grid.bogus"
    assert "grid.bogus: unknown key" in str(err.value)


def test_bad_value_is_named():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"driver": {"M": 0}})
    assert err.value.key == "driver.M"


def test_integrand_dimension_checked_before_running():
    with pytest.raises(ConfigError, match="integrand"):
        config_from_dict({"integrand": {"kind": "constant", "matrix": [[1.0, 0.0, 0.0]]}})


def test_unknown_integrand_kind():
    with pytest.raises(ConfigError, match="integrand"):
        config_from_dict({"integrand": {"kind": "nope"}})


def test_homotopy_needs_d2():
    with pytest.raises(ConfigError, match="d = 2"):
        config_from_dict({"driver": {"d": 3}, "integrand": {"kind": "homotopy", "s": 0.5}})


def test_blocks_bounded_by_d():
    with pytest.raises(ConfigError, match="suite.blocks"):
        config_from_dict({"suite": {"blocks": [2, 1]}})


def test_checkpoints_are_fractions():
    with pytest.raises(ConfigError, match="checkpoints"):
        config_from_dict({"suite": {"checkpoints": [0.5, 2.0]}})


@pytest.mark.parametrize("spec", [
    {"kind": "constant", "matrix": [[1.0, 0.0]]},
    {"kind": "coordinate_row", "index": 2},
    {"kind": "state", "name": "swap"},
    {"kind": "state", "name": "sigmoid", "weights": [[1.0, 2.0]]},
    {"kind": "random_constant", "n": 3, "rank": 1, "seed": 2},
    {"kind": "frame_projection", "index": 1, "frame": {"kind": "random", "seed": 3}},
    {"kind": "homotopy", "s": 0.25},
    {"kind": "sum", "terms": [{"kind": "state", "name": "z2_dz1"}, {"kind": "coordinate_row", "index": 1}]},
    {"kind": "scale", "factor": 2.0, "of": {"kind": "state", "name": "sign_z2"}},
    {"kind": "left", "matrix": [[1.0], [2.0]], "of": {"kind": "state", "name": "z2_dz1"}},
    {"kind": "graph", "of": {"kind": "state", "name": "z2_dz1"}},
])
def test_integrand_specs_build(spec):
    h = config_from_dict({"integrand": spec}).build_integrand()
    assert h.d == 2


def test_random_constant_rank():
    h = random_constant(4, 3, 2, 0)
    Z = generate_brownian(make_grid(1.0, 1), 3, 1, 0)
    assert numerical_rank(h.evaluate(Z, 0, 0)) == 2
    with pytest.raises(ValueError):
        random_constant(2, 3, 3, 0)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "bad.yaml").write_text("grid: [1, 2\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(tmp_path / "bad.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "list.yaml")


def test_round_trip_through_yaml(tmp_path):
    cfg = with_overrides(default_config(), seed=3, tolerance=1e-9, paths=10, steps=32)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(cfg.effective()))
    again = load_config(path)
    assert again == cfg
    assert (again.driver.seed, again.tolerance.eps_rel, again.driver.M, again.grid.N) == (3, 1e-9, 10, 32)


def test_output_directory_precedence(monkeypatch):
    monkeypatch.delenv("MARTDIM_OUT", raising=False)
    cfg = default_config()
    assert str(cfg.out_dir()) == "martdim-out"
    monkeypatch.setenv("MARTDIM_OUT", "/env")
    assert str(cfg.out_dir()) == "/env"
    cfg = config_from_dict({"output": {"directory": "/cfg"}})
    assert str(cfg.out_dir()) == "/cfg" and str(cfg.out_dir("/flag")) == "/flag"
