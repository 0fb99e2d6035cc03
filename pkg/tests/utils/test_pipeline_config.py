"""Tests for pipeline configuration loading and validation."""

from pathlib import Path

import pytest
import yaml

from scripts.utils.errors import ConfigError
from scripts.utils.pipeline_config import (
    DEFAULT_CONFIG,
    load_config,
    parse_override,
)

SHIPPED_CONFIG = Path(__file__).parent.parent.parent / "config" / "pipeline.yaml"


def write_config(tmp_path: Path, content: dict) -> Path:
    path = tmp_path / "pipeline.yaml"
    path.write_text(yaml.safe_dump(content))
    return path


def test_defaults_with_seed_only():
    """Defaults plus --seed form a valid configuration."""
    config = load_config(seed=7)

    assert config.seed == 7
    assert config.threads == 1
    assert config.imc_options().rank == 50
    assert config.imc_options().lam == 1.0
    assert config.refine_options().step_size == 0.01
    assert config.eval_settings["folds"] == 10


def test_seed_is_mandatory():
    """A run without a seed is refused."""
    with pytest.raises(ConfigError, match="seed is mandatory"):
        load_config()


def test_file_overrides_defaults(tmp_path):
    """Keys in the file replace defaults; the rest are kept."""
    path = write_config(tmp_path, {"seed": 3, "imc": {"rank": 12}})

    config = load_config(path)

    assert config.imc_options().rank == 12
    assert config.imc_options().max_sweeps == 100
    assert config.imc_options().seed == 3


def test_precedence_set_then_flags(tmp_path):
    """--set beats the file and dedicated flags beat --set."""
    path = write_config(tmp_path, {"seed": 3, "threads": 2, "imc": {"lambda": 0.5}})

    config = load_config(path, overrides=["imc.lambda=0.25", "seed=4"], seed=9, threads=3)

    assert config.imc_options().lam == 0.25
    assert config.seed == 9
    assert config.threads == 3


def test_relative_inputs_resolve_against_config_dir(tmp_path):
    """Input paths are relative to the config file, not the working directory."""
    path = write_config(tmp_path, {"seed": 1, "inputs": {"drug_vectors": "data/d.txt"}})

    config = load_config(path)

    assert config.input_path("drug_vectors") == tmp_path.resolve() / "data" / "d.txt"
    assert config.input_path("fingerprints") is None


def test_out_flag_overrides_output_directory(tmp_path):
    """--out replaces output.directory with an absolute path."""
    config = load_config(seed=1, output_dir=tmp_path / "run")

    assert config.output_dir == (tmp_path / "run").resolve()


@pytest.mark.parametrize(
    ("content", "location"),
    [
        ({"seed": 1, "imc": {"rank": 0}}, "imc.rank"),
        ({"seed": 1, "refine": {"step_size": -1}}, "refine.step_size"),
        ({"seed": 1, "alignment": {"gap": 1}}, "alignment.gap"),
        ({"seed": -1}, "seed"),
        ({"seed": 1, "unknown": True}, "<root>"),
    ],
)
def test_schema_errors_name_the_key(tmp_path, content, location):
    """Schema violations become ConfigError naming the offending key."""
    path = write_config(tmp_path, content)

    with pytest.raises(ConfigError) as excinfo:
        load_config(path)

    assert str(excinfo.value).startswith(location)
    assert excinfo.value.code == "config"


def test_missing_config_file(tmp_path):
    """A missing file is a ConfigError."""
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.yaml")


def test_invalid_yaml(tmp_path):
    """Unparseable YAML is a ConfigError."""
    path = tmp_path / "pipeline.yaml"
    path.write_text("seed: [1\n")

    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(path)


def test_parse_override():
    """Dotted keys nest; values are YAML scalars."""
    assert parse_override("imc.rank=8") == {"imc": {"rank": 8}}
    assert parse_override("refine.include_self_pairs=true") == {"refine": {"include_self_pairs": True}}
    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")


def test_required_inputs_checked(tmp_path):
    """check_inputs_exist reports the first missing input."""
    config = load_config(write_config(tmp_path, {"seed": 1}))

    with pytest.raises(ConfigError, match=r"inputs\.drug_vectors is required"):
        config.check_inputs_exist()


def test_echo_has_no_paths():
    """The echoed config carries settings only."""
    echo = load_config(seed=5).echo()

    assert set(echo) == {"seed", "alignment", "refine", "imc", "eval"}


def test_shipped_config_matches_defaults():
    """config/pipeline.yaml documents the in-code defaults."""
    with SHIPPED_CONFIG.open() as f:
        shipped = yaml.safe_load(f)

    for section in ("alignment", "refine", "imc"):
        assert shipped[section] == DEFAULT_CONFIG[section]
    assert shipped["synth"] == DEFAULT_CONFIG["synth"]
    load_config(SHIPPED_CONFIG)
