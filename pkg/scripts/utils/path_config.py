"""Artifact path configuration for the drugvec pipeline.

PathConfig maps artifact names to locations under one output directory. Names
come from config/paths.yaml, with in-code defaults for anything it omits.
"""

from __future__ import annotations

import logging
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

DEFAULT_PATHS_FILE = Path(__file__).parent.parent.parent / "config" / "paths.yaml"


class PathConfig:
    """Locations of every artifact below an output directory."""

    def __init__(self, output_dir: Path | str = "out", config_path: Path | None = None) -> None:
        """Initialize path configuration from YAML file.

        Args:
            output_dir: Root directory for all artifacts.
            config_path: Path to a paths.yaml. Defaults to config/paths.yaml
                        relative to project root.
        """
        self.output_dir = Path(output_dir)
        self.config_path = config_path or DEFAULT_PATHS_FILE
        self.config: dict[str, object] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load path configuration from YAML file."""
        try:
            with self.config_path.open() as f:
                self.config = yaml.safe_load(f) or {}
                logger.debug("Loaded path configuration from %s", self.config_path)
        except FileNotFoundError:
            logger.warning("Config file not found: %s. Using defaults.", self.config_path)
            self.config = {}
        except yaml.YAMLError:
            logger.exception("Error parsing path configuration")
            self.config = {}

    def _get_path(self, *keys: str) -> str:
        """Get a path value from config using dot notation.

        Args:
            *keys: Keys in nested structure (e.g., "reports", "directory")

        Returns:
            Path string value from config or default fallback
        """
        value: object = self.config
        for key in keys:
            if isinstance(value, dict):
                value = value.get(key)
            else:
                break

        if isinstance(value, str):
            return value

        defaults: dict[tuple[str, ...], str] = {
            ("reports", "directory"): "reports",
            ("reports", "alignment_report"): "alignment-report.md",
            ("reports", "alignment_json"): "alignment-report.json",
            ("reports", "refine_json"): "refine-report.json",
            ("reports", "fit_json"): "fit-report.json",
            ("reports", "eval_report"): "eval-report.md",
            ("reports", "eval_json"): "eval-report.json",
            ("reports", "case_study_report"): "case-study-report.md",
            ("reports", "case_study_json"): "case-study-report.json",
            ("stages", "similarity_dir"): "similarity",
            ("stages", "refined_dir"): "refined",
            ("stages", "drug_vectors"): "drug_vectors.txt",
            ("stages", "disease_vectors"): "disease_vectors.txt",
            ("stages", "model"): "model/imc-model.json",
            ("tables", "scores"): "scores.csv",
            ("tables", "roc"): "roc.csv",
            ("tables", "roc_folds"): "roc_folds.csv",
            ("tables", "topk"): "topk.csv",
            ("tables", "case_study"): "case_study.csv",
            ("tables", "dimension_sweep"): "dimension_sweep.csv",
            ("synthetic", "directory"): "synthetic",
        }

        return defaults.get(tuple(keys), "")

    # Report paths
    @property
    def reports_dir(self) -> Path:
        """Directory for generated reports."""
        return self.output_dir / self._get_path("reports", "directory")

    @property
    def alignment_report(self) -> Path:
        """Alignment report (markdown)."""
        return self.reports_dir / self._get_path("reports", "alignment_report")

    @property
    def alignment_json(self) -> Path:
        """Alignment report (JSON)."""
        return self.reports_dir / self._get_path("reports", "alignment_json")

    @property
    def refine_json(self) -> Path:
        """Refinement statistics (JSON)."""
        return self.reports_dir / self._get_path("reports", "refine_json")

    @property
    def fit_json(self) -> Path:
        """IMC fit diagnostics (JSON)."""
        return self.reports_dir / self._get_path("reports", "fit_json")

    @property
    def eval_report(self) -> Path:
        """Cross-validation report (markdown)."""
        return self.reports_dir / self._get_path("reports", "eval_report")

    @property
    def eval_json(self) -> Path:
        """Cross-validation report (JSON)."""
        return self.reports_dir / self._get_path("reports", "eval_json")

    @property
    def case_study_report(self) -> Path:
        """Case-study report (markdown)."""
        return self.reports_dir / self._get_path("reports", "case_study_report")

    @property
    def case_study_json(self) -> Path:
        """Case-study report (JSON)."""
        return self.reports_dir / self._get_path("reports", "case_study_json")

    # Stage artifacts
    @property
    def similarity_dir(self) -> Path:
        """Directory of persisted similarity matrices."""
        return self.output_dir / self._get_path("stages", "similarity_dir")

    def similarity_matrix(self, side: str, name: str) -> Path:
        """File of one similarity matrix."""
        return self.similarity_dir / f"{side}_{name}.tsv"

    @property
    def refined_dir(self) -> Path:
        """Directory of refined feature vectors."""
        return self.output_dir / self._get_path("stages", "refined_dir")

    @property
    def refined_drug_vectors(self) -> Path:
        """Refined drug feature vectors."""
        return self.refined_dir / self._get_path("stages", "drug_vectors")

    @property
    def refined_disease_vectors(self) -> Path:
        """Refined disease feature vectors."""
        return self.refined_dir / self._get_path("stages", "disease_vectors")

    @property
    def model(self) -> Path:
        """Fitted IMC model."""
        return self.output_dir / self._get_path("stages", "model")

    # Tables
    @property
    def scores(self) -> Path:
        """Per-disease drug ranking table."""
        return self.output_dir / self._get_path("tables", "scores")

    @property
    def roc(self) -> Path:
        """Pooled ROC curve."""
        return self.output_dir / self._get_path("tables", "roc")

    @property
    def roc_folds(self) -> Path:
        """Per-fold ROC curves."""
        return self.output_dir / self._get_path("tables", "roc_folds")

    @property
    def topk(self) -> Path:
        """Top-rank hit counts."""
        return self.output_dir / self._get_path("tables", "topk")

    @property
    def case_study(self) -> Path:
        """Leave-disease-out ranking."""
        return self.output_dir / self._get_path("tables", "case_study")

    @property
    def dimension_sweep(self) -> Path:
        """Mean AUC per vector dimension."""
        return self.output_dir / self._get_path("tables", "dimension_sweep")

    @property
    def synthetic_dir(self) -> Path:
        """Directory the synth command writes its dataset to."""
        return self.output_dir / self._get_path("synthetic", "directory")

    # Utility methods
    def ensure_report_dir_exists(self) -> Path:
        """Ensure reports directory exists and return its path."""
        self.reports_dir.mkdir(parents=True, exist_ok=True)
        return self.reports_dir
