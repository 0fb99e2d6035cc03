"""In-process pipeline stages shared by the command-line entry point.

Each stage takes a PipelineConfig and plain domain objects, so the staged CLI
(one command per stage, artifacts on disk) and a single end-to-end run go
through the same code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from . import artifacts, ingest
from .errors import ConfigError, DomainValidationError
from .imc import ImcFitReport, fit_imc, score_all
from .model import Side
from .refine import RefineReport, refine_all
from .simkit import MeasureKind, build_similarity_matrix

if TYPE_CHECKING:
    from pathlib import Path

    from .model import (
        AssociationMatrix,
        EmbeddingSet,
        EntityCatalog,
        FactorModel,
        ScoreMatrix,
        SimilarityStack,
    )
    from .path_config import PathConfig
    from .pipeline_config import PipelineConfig

logger = logging.getLogger(__name__)

SIMILARITY_INDEX = "index.json"


@dataclass(frozen=True)
class MeasureSpec:
    """One similarity measure: where its data comes from and how it is computed."""

    side: Side
    name: str
    kind: MeasureKind
    input_name: str
    path: Path


@dataclass
class Dataset:
    """Everything parsed from the configured inputs, aligned to one catalog."""

    catalog: EntityCatalog
    drug_vectors: EmbeddingSet
    disease_vectors: EmbeddingSet
    associations: AssociationMatrix
    alignment: ingest.AlignmentReport
    measures: list[MeasureSpec] = field(default_factory=list)
    evidence: dict[str, set[str]] | None = None
    ground_truth: dict[tuple[Side, str], int] | None = None

    def planted_drugs(self, disease_id: str) -> set[int] | None:
        """Drug indices sharing the disease's planted block, when ground truth exists."""
        if self.ground_truth is None:
            return None
        block = self.ground_truth.get((Side.DISEASE, disease_id))
        if block is None:
            return None
        return {
            i
            for i, drug in enumerate(self.catalog.drug_ids)
            if self.ground_truth.get((Side.DRUG, drug)) == block
        }


def _measure_specs(config: PipelineConfig) -> list[MeasureSpec]:
    """Configured measures in canonical order: drugs, then diseases."""
    candidates = [
        (Side.DRUG, "side_effect", MeasureKind.JACCARD, "side_effects"),
        (Side.DRUG, "chemical", MeasureKind.TANIMOTO, "fingerprints"),
        (Side.DRUG, "target_sequence", MeasureKind.SEQUENCE, "drug_sequences"),
        (Side.DISEASE, "phenotype", MeasureKind.PRECOMPUTED, "phenotype_matrix"),
        (Side.DISEASE, "gene_sequence", MeasureKind.SEQUENCE, "disease_sequences"),
    ]
    specs = [
        MeasureSpec(side, name, kind, input_name, path)
        for side, name, kind, input_name in candidates
        if (path := config.input_path(input_name)) is not None
    ]
    specs.extend(
        MeasureSpec(side, name, MeasureKind.PRECOMPUTED, f"precomputed:{name}", path)
        for side, name, path in config.precomputed()
    )
    seen: set[tuple[Side, str]] = set()
    for spec in specs:
        if (spec.side, spec.name) in seen:
            raise ConfigError(f"duplicate {spec.side.value} similarity measure {spec.name!r}")
        seen.add((spec.side, spec.name))
    return sorted(specs, key=lambda s: 0 if s.side is Side.DRUG else 1)


def _covered_ids(spec: MeasureSpec) -> frozenset[str]:
    if spec.kind is MeasureKind.JACCARD:
        return frozenset(ingest.load_annotation_sets(spec.path))
    if spec.kind is MeasureKind.TANIMOTO:
        return frozenset(ingest.load_fingerprints(spec.path).bits)
    if spec.kind is MeasureKind.SEQUENCE:
        return frozenset(ingest.load_sequences(spec.path))
    return ingest.similarity_matrix_ids(spec.path)


def load_dataset(config: PipelineConfig) -> Dataset:
    """Parse every input and align them to one catalog.

    Raises:
        ConfigError: Missing files.
        InputFormatError: Malformed files.
        EmptyCatalogError: No entity survives on a side.
    """
    config.check_inputs_exist()
    drug_raw = ingest.load_embeddings(config.require_input("drug_vectors"), Side.DRUG)
    disease_raw = ingest.load_embeddings(config.require_input("disease_vectors"), Side.DISEASE)
    concept_report = None
    concepts_path = config.input_path("disease_concepts")
    if concepts_path is not None:
        disease_raw, concept_report = ingest.aggregate_concept_vectors(
            ingest.load_concept_map(concepts_path),
            disease_raw,
        )
    if drug_raw.dim != disease_raw.dim:
        raise DomainValidationError(
            f"drug vectors have dimension {drug_raw.dim}, disease vectors {disease_raw.dim}",
        )

    pairs = ingest.read_association_pairs(config.require_input("associations"))
    drug_ids, disease_ids = ingest.catalog_ids_from_pairs(pairs)
    drugs_path = config.input_path("drugs")
    diseases_path = config.input_path("diseases")
    if drugs_path is not None:
        drug_ids = list(ingest.load_entity_list(drugs_path))
    if diseases_path is not None:
        disease_ids = list(ingest.load_entity_list(diseases_path))

    measures = _measure_specs(config)
    coverage = {spec.input_name: (spec.side, _covered_ids(spec)) for spec in measures}
    catalog, report = ingest.align_catalog(
        drug_ids,
        disease_ids,
        drug_raw,
        disease_raw,
        coverage,
    )
    associations, association_report = ingest.load_associations(
        config.require_input("associations"),
        catalog,
    )
    report.associations = association_report
    report.concepts = concept_report

    evidence_path = config.input_path("evidence")
    truth_path = config.input_path("ground_truth")
    return Dataset(
        catalog=catalog,
        drug_vectors=drug_raw.select(catalog.drug_ids),
        disease_vectors=disease_raw.select(catalog.disease_ids),
        associations=associations,
        alignment=report,
        measures=measures,
        evidence=ingest.load_evidence(evidence_path) if evidence_path else None,
        ground_truth=ingest.load_ground_truth(truth_path) if truth_path else None,
    )


def build_similarity_stacks(
    dataset: Dataset,
    config: PipelineConfig,
) -> tuple[SimilarityStack, SimilarityStack]:
    """Build every configured drug and disease similarity matrix."""
    scoring = None
    drug_sims = []
    disease_sims = []
    for spec in dataset.measures:
        source: Any
        if spec.kind is MeasureKind.JACCARD:
            source = ingest.load_annotation_sets(spec.path)
        elif spec.kind is MeasureKind.TANIMOTO:
            source = ingest.load_fingerprints(spec.path)
        elif spec.kind is MeasureKind.SEQUENCE:
            source = ingest.load_sequences(spec.path)
            scoring = scoring or config.scoring()
        else:
            source = ingest.load_similarity_matrix(spec.path, dataset.catalog, spec.side, spec.name)
        matrix = build_similarity_matrix(
            dataset.catalog,
            spec.side,
            spec.name,
            spec.kind,
            source,
            scoring=scoring,
            workers=config.threads,
        )
        (drug_sims if spec.side is Side.DRUG else disease_sims).append(matrix)
    return tuple(drug_sims), tuple(disease_sims)


def save_similarity_stacks(
    paths: PathConfig,
    catalog: EntityCatalog,
    stacks: tuple[SimilarityStack, SimilarityStack],
) -> list[Path]:
    """Persist both stacks plus an index naming each matrix file."""
    written: list[Path] = []
    index = []
    for matrix in (*stacks[0], *stacks[1]):
        path = paths.similarity_matrix(matrix.side.value, matrix.name)
        artifacts.write_similarity_matrix(path, matrix, catalog.ids(matrix.side))
        index.append({"side": matrix.side.value, "name": matrix.name, "file": path.name})
        written.append(path)
    written.append(
        artifacts.write_json(
            paths.similarity_dir / SIMILARITY_INDEX,
            {"catalog_hash": catalog.fingerprint(), "matrices": index},
        ),
    )
    return written


def load_similarity_stacks(
    paths: PathConfig,
    catalog: EntityCatalog,
) -> tuple[SimilarityStack, SimilarityStack]:
    """Reload stacks written by :func:`save_similarity_stacks`."""
    index = artifacts.read_json(paths.similarity_dir / SIMILARITY_INDEX)
    if index.get("catalog_hash") != catalog.fingerprint():
        raise DomainValidationError("similarity matrices were built for a different catalog")
    drug_sims = []
    disease_sims = []
    for entry in index["matrices"]:
        side = Side(entry["side"])
        matrix = ingest.load_similarity_matrix(
            paths.similarity_dir / entry["file"],
            catalog,
            side,
            entry["name"],
        )
        (drug_sims if side is Side.DRUG else disease_sims).append(matrix)
    return tuple(drug_sims), tuple(disease_sims)


def refine_features(
    dataset: Dataset,
    stacks: tuple[SimilarityStack, SimilarityStack],
    config: PipelineConfig,
) -> tuple[EmbeddingSet, EmbeddingSet, dict[str, RefineReport]]:
    """Refine drug and disease vectors against their stacks."""
    opts = config.refine_options()
    reports = {Side.DRUG.value: RefineReport(), Side.DISEASE.value: RefineReport()}
    drugs = refine_all(
        dataset.drug_vectors,
        stacks[0],
        opts,
        config.threads,
        reports[Side.DRUG.value],
    )
    diseases = refine_all(
        dataset.disease_vectors,
        stacks[1],
        opts,
        config.threads,
        reports[Side.DISEASE.value],
    )
    return drugs, diseases, reports


def save_features(paths: PathConfig, drugs: EmbeddingSet, diseases: EmbeddingSet) -> list[Path]:
    """Persist refined feature vectors."""
    return [
        artifacts.write_embeddings(paths.refined_drug_vectors, drugs),
        artifacts.write_embeddings(paths.refined_disease_vectors, diseases),
    ]


def load_features(paths: PathConfig, catalog: EntityCatalog) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Reload refined feature vectors in catalog order."""
    for path in (paths.refined_drug_vectors, paths.refined_disease_vectors):
        if not path.is_file():
            raise ConfigError(f"missing artifact {path}; run the refine command first")
    drugs = ingest.load_embeddings(paths.refined_drug_vectors, Side.DRUG)
    diseases = ingest.load_embeddings(paths.refined_disease_vectors, Side.DISEASE)
    return drugs.select(catalog.drug_ids), diseases.select(catalog.disease_ids)


def fit_model(
    dataset: Dataset,
    drugs: EmbeddingSet,
    diseases: EmbeddingSet,
    config: PipelineConfig,
) -> tuple[FactorModel, ImcFitReport]:
    """Fit IMC on every known association."""
    report = ImcFitReport()
    model = fit_imc(dataset.associations, drugs, diseases, config.imc_options(), report=report)
    return model, report


def run_end_to_end(config: PipelineConfig) -> tuple[Dataset, ScoreMatrix]:
    """Load, build similarities, refine, fit and score in one process."""
    dataset = load_dataset(config)
    stacks = build_similarity_stacks(dataset, config)
    drugs, diseases, _ = refine_features(dataset, stacks, config)
    model, _ = fit_model(dataset, drugs, diseases, config)
    return dataset, score_all(model, drugs, diseases)
