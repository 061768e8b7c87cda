"""Pruebas de la validación de configuraciones."""
import json

import pytest

from experiments.loader import ConfigError, load_config, parse_config
from experiments.models import ExperimentConfig, ExperimentKind

SOLVE = {
    "kind": "solve",
    "dim": 2,
    "u_vortices": [{"point": [0, 0], "multiplicity": 1}],
    "lam": 1.0,
    "radius": 4,
}


def test_parse_minimal_solve():
    config = parse_config(SOLVE)
    assert config.kind == ExperimentKind.SOLVE
    assert config.radii == [4, 6, 9, 13, 19, 28]
    cfg = config.vortex_config()
    assert cfg.u_vortices == (((0, 0), 1),)
    params = config.scheme_params()
    assert params.lam == 1.0
    assert params.shift == pytest.approx(2.5)


def test_overrides_apply_to_scalar_fields():
    config = parse_config(SOLVE, {"seed": 42, "workers": 3, "output_dir": None})
    assert config.seed == 42
    assert config.workers == 3
    assert config.output_dir is None
    with pytest.raises(ConfigError, match="cannot be overridden"):
        parse_config(SOLVE, {"lam": 2.0})


def test_negative_lambda_names_field():
    with pytest.raises(ConfigError, match="lam"):
        parse_config({**SOLVE, "lam": -1.0})


@pytest.mark.parametrize("patch,field", [
    ({"radius": None}, "radius"),
    ({"kind": "sweep_lambda"}, "lambdas"),
    ({"u_vortices": [{"point": [0, 0, 0]}]}, "u_vortices"),
    ({"u_vortices": [{"point": [0, 0], "multiplicity": 0.5}]}, "non-integer"),
    ({"radii": [4, 4]}, "radii"),
    ({"shift_ratio": 2.0}, "shift_ratio"),
    ({"unknown": 1}, "unknown"),
    ({"dim": 9, "u_vortices": [{"point": [0] * 9}]}, "'dim' must be ≤"),
])
def test_invalid_configs(patch, field):
    with pytest.raises(ConfigError, match=field):
        parse_config({**SOLVE, **patch})


def test_green_table_requirements():
    with pytest.raises(ConfigError, match="dims"):
        parse_config({"kind": "green_table", "dim": 3})
    with pytest.raises(ConfigError, match="≥ 3"):
        parse_config({"kind": "green_table", "dim": 3, "dims": [2, 3]})
    config = parse_config({"kind": "green_table", "dim": 3, "table_radius": 2})
    assert config.table_radius == 2


def test_fractional_masses_allowed_with_flag():
    config = parse_config({**SOLVE, "fractional": True, "u_vortices": [{"point": [0, 0], "multiplicity": 0.25}]})
    assert config.vortex_config().fractional


def test_config_echo_roundtrip():
    config = parse_config({**SOLVE, "kind": "decay", "radius": None, "axis": 1})
    echo = json.loads(json.dumps(config.model_dump(mode="json")))
    assert ExperimentConfig.model_validate(echo) == config


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "kind": "solve",\n  "dim": 2,,\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"bad\.json:3:\d+"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.json")


def test_non_object_config():
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config([1, 2, 3])
