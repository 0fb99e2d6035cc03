"""Pipeline configuration: defaults, YAML file, overrides and schema validation.

Precedence (lowest first): DEFAULT_CONFIG, the YAML config file, ``--set
section.key=value`` overrides, then the dedicated CLI flags (--seed, --threads,
--out). The merged result is validated against config/pipeline.schema.yaml.
Relative input paths resolve against the config file's directory.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import yaml
from jsonschema import Draft202012Validator

from .errors import ConfigError
from .evalkit import DEFAULT_THRESHOLDS
from .imc import ImcOptions
from .model import Side
from .refine import RefineOptions
from .simkit import AlignmentScoring, load_substitution_table
from .synthetic import SyntheticParams

if TYPE_CHECKING:
    from collections.abc import Iterable

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).parent.parent.parent / "config" / "pipeline.schema.yaml"

INPUT_KEYS = (
    "drugs",
    "diseases",
    "drug_vectors",
    "disease_vectors",
    "disease_concepts",
    "associations",
    "side_effects",
    "fingerprints",
    "drug_sequences",
    "disease_sequences",
    "phenotype_matrix",
    "substitution_table",
    "evidence",
    "ground_truth",
)
REQUIRED_INPUTS = ("drug_vectors", "disease_vectors", "associations")

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": None,
    "threads": 1,
    "inputs": {**dict.fromkeys(INPUT_KEYS), "precomputed_similarities": []},
    "alignment": {"match": 3.0, "mismatch": -3.0, "gap": -2.0},
    "refine": {
        "step_size": 0.01,
        "max_iters": 500,
        "rel_tol": 1e-8,
        "include_self_pairs": False,
    },
    "imc": {
        "rank": 50,
        "lambda": 1.0,
        "max_sweeps": 100,
        "sweep_tol": 1e-7,
        "cg_tol": 1e-8,
        "cg_max_iters": 200,
    },
    "eval": {
        "folds": 10,
        "thresholds": list(DEFAULT_THRESHOLDS),
        "compare_raw": False,
        "case_study_top_k": 10,
        "sweep_dims": [8, 16, 32, 64],
    },
    "synth": SyntheticParams().to_dict(),
    "output": {"directory": "out"},
}


def _deep_merge(base: dict, override: dict) -> dict:
    """Deep merge two dictionaries."""
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def parse_override(text: str) -> dict[str, Any]:
    """Turn ``section.key=value`` into a nested dict; the value is a YAML scalar."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"override {text!r}: {e}") from e
    nested: dict[str, Any] = {}
    cursor = nested
    parts = key.strip().split(".")
    for part in parts[:-1]:
        cursor = cursor.setdefault(part, {})
    cursor[parts[-1]] = value
    return nested


def _load_schema() -> dict[str, Any]:
    with SCHEMA_PATH.open() as f:
        return yaml.safe_load(f)


def validate_config(data: dict[str, Any]) -> None:
    """Validate a merged config against the schema.

    Raises:
        ConfigError: Naming the first offending key path.
    """
    if data.get("seed") is None:
        raise ConfigError("seed is mandatory (set it in the config or pass --seed)")
    validator = Draft202012Validator(_load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        first = errors[0]
        location = ".".join(str(p) for p in first.absolute_path) or "<root>"
        raise ConfigError(f"{location}: {first.message}")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Validated configuration plus the directory relative paths resolve against."""

    data: dict[str, Any]
    base_dir: Path

    @property
    def seed(self) -> int:
        """Global seed; every random substream derives from it."""
        return int(self.data["seed"])

    @property
    def threads(self) -> int:
        """Worker cap for parallel stages."""
        return int(self.data["threads"])

    @property
    def output_dir(self) -> Path:
        """Directory all artifacts are written under."""
        return self.resolve(self.data["output"]["directory"])

    def resolve(self, value: str | Path) -> Path:
        """Resolve a path against the config directory."""
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    def input_path(self, name: str) -> Path | None:
        """Resolved path of an input, or None when it is not configured."""
        value = self.data["inputs"].get(name)
        return self.resolve(value) if value else None

    def require_input(self, name: str) -> Path:
        """Resolved path of a mandatory input."""
        path = self.input_path(name)
        if path is None:
            raise ConfigError(f"inputs.{name} is required")
        return path

    def precomputed(self) -> list[tuple[Side, str, Path]]:
        """Extra precomputed similarity matrices as (side, name, path)."""
        return [
            (Side(entry["side"]), entry["name"], self.resolve(entry["path"]))
            for entry in self.data["inputs"].get("precomputed_similarities", [])
        ]

    def check_inputs_exist(self) -> None:
        """Every configured input file must exist.

        Raises:
            ConfigError: For the first missing required input or file.
        """
        for name in REQUIRED_INPUTS:
            self.require_input(name)
        for name in INPUT_KEYS:
            path = self.input_path(name)
            if path is not None and not path.is_file():
                raise ConfigError(f"inputs.{name}: file not found: {path}")
        for side, name, path in self.precomputed():
            if not path.is_file():
                raise ConfigError(f"precomputed {side.value} similarity {name!r}: file not found: {path}")

    def refine_options(self) -> RefineOptions:
        """RefineOptions from the ``refine`` section."""
        return RefineOptions.from_config(self.data["refine"])

    def imc_options(self) -> ImcOptions:
        """ImcOptions from the ``imc`` section and the seed."""
        return ImcOptions.from_config(self.data["imc"], self.seed)

    def synth_params(self) -> SyntheticParams:
        """Generator parameters from the ``synth`` section."""
        return SyntheticParams.from_config(self.data["synth"])

    def scoring(self) -> AlignmentScoring:
        """Alignment scoring, including the substitution table when configured."""
        section = self.data["alignment"]
        table_path = self.input_path("substitution_table")
        return AlignmentScoring(
            match=float(section["match"]),
            mismatch=float(section["mismatch"]),
            gap=float(section["gap"]),
            substitution=load_substitution_table(table_path) if table_path else None,
        )

    @property
    def eval_settings(self) -> dict[str, Any]:
        """The ``eval`` section."""
        return self.data["eval"]

    def echo(self) -> dict[str, Any]:
        """Config subset recorded in reports (no paths, so reports are location-independent)."""
        return {
            key: copy.deepcopy(self.data[key])
            for key in ("seed", "alignment", "refine", "imc", "eval")
        }


def load_config(
    config_path: Path | None = None,
    overrides: Iterable[str] = (),
    seed: int | None = None,
    threads: int | None = None,
    output_dir: Path | None = None,
) -> PipelineConfig:
    """Load configuration from YAML file and merge it over the defaults.

    Args:
        config_path: YAML config file; None uses the defaults only.
        overrides: ``section.key=value`` strings, applied after the file.
        seed: --seed, overrides the config.
        threads: --threads, overrides the config.
        output_dir: --out, overrides ``output.directory``.

    Returns:
        Validated PipelineConfig.

    Raises:
        ConfigError: Unreadable file, invalid YAML, or schema violation.
    """
    data = copy.deepcopy(DEFAULT_CONFIG)
    base_dir = Path.cwd()
    if config_path is not None:
        try:
            with config_path.open() as f:
                loaded = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {config_path}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {config_path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{config_path}: top level must be a mapping")
        data = _deep_merge(data, loaded)
        base_dir = config_path.resolve().parent
        logger.info("Loaded configuration from %s", config_path)

    for text in overrides:
        data = _deep_merge(data, parse_override(text))
    if seed is not None:
        data["seed"] = seed
    if threads is not None:
        data["threads"] = threads
    if output_dir is not None:
        data["output"] = {**data["output"], "directory": str(output_dir.resolve())}

    validate_config(data)
    return PipelineConfig(data, base_dir)
