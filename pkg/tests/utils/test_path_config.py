"""Tests for artifact path configuration."""

import tempfile
from pathlib import Path

import pytest
import yaml

from scripts.utils.path_config import PathConfig


@pytest.fixture
def temp_config_dir():
    """Create temporary directory with a partial paths.yaml."""
    with tempfile.TemporaryDirectory() as tmpdir:
        tmpdir_path = Path(tmpdir)

        config_content = {
            "version": "1.0.0",
            "reports": {
                "directory": "test_reports",
                "eval_json": "cv.json",
            },
            "stages": {
                "model": "fitted/model.json",
            },
        }

        config_path = tmpdir_path / "paths.yaml"
        with config_path.open("w") as f:
            yaml.dump(config_content, f)

        yield tmpdir_path, config_path


def test_path_config_loads_yaml(temp_config_dir):
    """Test that PathConfig loads YAML configuration."""
    _, config_path = temp_config_dir

    config = PathConfig("out", config_path)

    assert config.config is not None
    assert config.config.get("version") == "1.0.0"


def test_path_config_instances_are_independent(temp_config_dir):
    """Each output directory gets its own configuration."""
    _, config_path = temp_config_dir

    first = PathConfig("run1", config_path)
    second = PathConfig("run2", config_path)

    assert first is not second
    assert first.scores != second.scores


def test_path_config_reports_dir_property(temp_config_dir):
    """Test that reports_dir is resolved below the output directory."""
    _, config_path = temp_config_dir

    config = PathConfig("out", config_path)
    assert config.reports_dir == Path("out") / "test_reports"
    assert config.eval_json == Path("out") / "test_reports" / "cv.json"


def test_path_config_falls_back_to_defaults_for_missing_keys(temp_config_dir):
    """Keys absent from the YAML use the in-code defaults."""
    _, config_path = temp_config_dir

    config = PathConfig("out", config_path)
    assert config.eval_report == Path("out") / "test_reports" / "eval-report.md"
    assert config.roc == Path("out") / "roc.csv"
    assert config.model == Path("out") / "fitted" / "model.json"


def test_path_config_handles_missing_file():
    """Test that PathConfig handles missing config file gracefully."""
    missing_path = Path("/nonexistent/paths.yaml")

    config = PathConfig("out", missing_path)

    assert config.config == {}
    assert config.scores == Path("out") / "scores.csv"
    assert config.refined_drug_vectors == Path("out") / "refined" / "drug_vectors.txt"


def test_path_config_similarity_matrix_naming():
    """Similarity files are named after side and measure."""
    config = PathConfig("out")
    assert config.similarity_matrix("drug", "chemical") == (
        Path("out") / "similarity" / "drug_chemical.tsv"
    )


def test_path_config_default_layout_matches_shipped_yaml():
    """The shipped paths.yaml and the in-code fallbacks agree."""
    shipped = PathConfig("out")
    fallback = PathConfig("out", Path("/nonexistent/paths.yaml"))

    for name in (
        "alignment_report",
        "alignment_json",
        "refine_json",
        "fit_json",
        "eval_report",
        "eval_json",
        "case_study_report",
        "case_study_json",
        "refined_drug_vectors",
        "refined_disease_vectors",
        "model",
        "scores",
        "roc",
        "roc_folds",
        "topk",
        "case_study",
        "dimension_sweep",
        "synthetic_dir",
    ):
        assert getattr(shipped, name) == getattr(fallback, name), name


def test_path_config_ensure_dir_exists(tmp_path):
    """Test that ensure_report_dir_exists creates directory."""
    config = PathConfig(tmp_path)
    result = config.ensure_report_dir_exists()

    assert result.exists()
    assert result.is_dir()
