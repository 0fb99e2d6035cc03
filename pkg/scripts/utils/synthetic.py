"""Planted-block synthetic datasets for desk-scale benchmarking.

Drugs and diseases are split into ``n_blocks`` matched blocks. Each block has a
drug centroid and a disease centroid; raw vectors are the centroid plus
Gaussian noise, similarities are high inside a block and low across blocks,
and associations are sampled only between matched blocks. The block labels are
the ground truth for case studies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np
import yaml

from . import artifacts
from .errors import DomainValidationError
from .model import (
    AssociationMatrix,
    EmbeddingSet,
    EntityCatalog,
    Side,
    SimilarityMatrix,
    SimilarityStack,
)

if TYPE_CHECKING:
    from pathlib import Path

logger = logging.getLogger(__name__)

SYNTH_STREAM = 3
DRUG_MEASURES = ("side_effect", "chemical", "target_sequence")
DISEASE_MEASURES = ("phenotype", "gene_sequence")


@dataclass(frozen=True, eq=False)
class SyntheticParams:
    """Generator settings (defaults are the full-size benchmark)."""

    n_drugs: int = 120
    n_diseases: int = 80
    dim: int = 32
    n_blocks: int = 4
    noise: float = 0.1
    assoc_density: float = 0.5

    @classmethod
    def from_config(cls, section: dict[str, Any]) -> SyntheticParams:
        """Build from the ``synth`` config section."""
        return cls(
            n_drugs=int(section.get("n_drugs", cls.n_drugs)),
            n_diseases=int(section.get("n_diseases", cls.n_diseases)),
            dim=int(section.get("dim", cls.dim)),
            n_blocks=int(section.get("n_blocks", cls.n_blocks)),
            noise=float(section.get("noise", cls.noise)),
            assoc_density=float(section.get("assoc_density", cls.assoc_density)),
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "n_drugs": self.n_drugs,
            "n_diseases": self.n_diseases,
            "dim": self.dim,
            "n_blocks": self.n_blocks,
            "noise": self.noise,
            "assoc_density": self.assoc_density,
        }


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """Everything the pipeline consumes, plus the planted block labels."""

    catalog: EntityCatalog
    drug_vectors: EmbeddingSet
    disease_vectors: EmbeddingSet
    drug_sims: SimilarityStack
    disease_sims: SimilarityStack
    associations: AssociationMatrix
    drug_blocks: np.ndarray
    disease_blocks: np.ndarray

    def true_drugs(self, j: int) -> set[int]:
        """Drug indices planted in the same block as disease ``j``."""
        return {int(i) for i in np.flatnonzero(self.drug_blocks == self.disease_blocks[j])}


def _centroids(rng: np.random.Generator, n_blocks: int, dim: int) -> np.ndarray:
    gaussian = rng.standard_normal((dim, n_blocks))
    if dim >= n_blocks:
        q, _ = np.linalg.qr(gaussian)
        return q.T
    return (gaussian / np.linalg.norm(gaussian, axis=0)).T


def _blocks(rng: np.random.Generator, n: int, n_blocks: int) -> np.ndarray:
    return rng.permutation(np.arange(n) % n_blocks)


def _block_similarity(
    rng: np.random.Generator,
    blocks: np.ndarray,
    noise: float,
    side: Side,
    name: str,
) -> SimilarityMatrix:
    n = len(blocks)
    jitter = noise * np.abs(rng.standard_normal((n, n)))
    same = blocks[:, None] == blocks[None, :]
    values = np.clip(np.where(same, 1.0 - jitter, jitter), 0.0, 1.0)
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(side, name, values, np.ones((n, n), dtype=bool))


def _ids(prefix: str, n: int) -> tuple[str, ...]:
    width = max(4, len(str(n)))
    return tuple(f"{prefix}{k + 1:0{width}d}" for k in range(n))


def generate_synthetic(
    n_drugs: int = 120,
    n_diseases: int = 80,
    dim: int = 32,
    n_blocks: int = 4,
    noise: float = 0.1,
    assoc_density: float = 0.5,
    seed: int = 0,
) -> SyntheticDataset:
    """Generate a planted-block dataset; identical for identical arguments.

    Raises:
        DomainValidationError: Invalid sizes, noise or density.
    """
    if n_drugs < 1 or n_diseases < 1 or dim < 1:
        raise DomainValidationError("synthetic sizes must be positive")
    if not 1 <= n_blocks <= min(n_drugs, n_diseases):
        raise DomainValidationError("n_blocks must be between 1 and min(n_drugs, n_diseases)")
    if noise < 0:
        raise DomainValidationError("noise must be non-negative")
    if not 0 < assoc_density <= 1:
        raise DomainValidationError("assoc_density must be in (0, 1]")

    rng = np.random.default_rng([seed, SYNTH_STREAM])
    drug_blocks = _blocks(rng, n_drugs, n_blocks)
    disease_blocks = _blocks(rng, n_diseases, n_blocks)
    drug_centroids = _centroids(rng, n_blocks, dim)
    disease_centroids = _centroids(rng, n_blocks, dim)
    drug_raw = drug_centroids[drug_blocks] + noise * rng.standard_normal((n_drugs, dim))
    disease_raw = disease_centroids[disease_blocks] + noise * rng.standard_normal((n_diseases, dim))

    drug_sims = tuple(
        _block_similarity(rng, drug_blocks, noise, Side.DRUG, name) for name in DRUG_MEASURES
    )
    disease_sims = tuple(
        _block_similarity(rng, disease_blocks, noise, Side.DISEASE, name)
        for name in DISEASE_MEASURES
    )

    matched = drug_blocks[:, None] == disease_blocks[None, :]
    draws = rng.random((n_drugs, n_diseases))
    associations = AssociationMatrix.from_dense(matched & (draws < assoc_density))

    catalog = EntityCatalog(_ids("DRUG", n_drugs), _ids("DIS", n_diseases))
    logger.info(
        "Generated synthetic dataset: %d drugs, %d diseases, %d blocks, %d associations",
        n_drugs,
        n_diseases,
        n_blocks,
        len(associations),
    )
    return SyntheticDataset(
        catalog=catalog,
        drug_vectors=EmbeddingSet(Side.DRUG, catalog.drug_ids, drug_raw),
        disease_vectors=EmbeddingSet(Side.DISEASE, catalog.disease_ids, disease_raw),
        drug_sims=drug_sims,
        disease_sims=disease_sims,
        associations=associations,
        drug_blocks=drug_blocks,
        disease_blocks=disease_blocks,
    )


def generate_from_params(params: SyntheticParams, seed: int) -> SyntheticDataset:
    """generate_synthetic with a SyntheticParams bundle."""
    return generate_synthetic(
        params.n_drugs,
        params.n_diseases,
        params.dim,
        params.n_blocks,
        params.noise,
        params.assoc_density,
        seed,
    )


def write_synthetic(
    dataset: SyntheticDataset,
    directory: Path,
    seed: int,
    params: SyntheticParams | None = None,
) -> Path:
    """Write the dataset in the ingest formats plus a config that points at it.

    Returns:
        Path of the written ``pipeline.yaml``; its input paths are relative to it.
    """
    directory.mkdir(parents=True, exist_ok=True)
    catalog = dataset.catalog
    artifacts.write_entity_list(directory / "drugs.txt", catalog.drug_ids)
    artifacts.write_entity_list(directory / "diseases.txt", catalog.disease_ids)
    artifacts.write_embeddings(directory / "drug_vectors.txt", dataset.drug_vectors)
    artifacts.write_embeddings(directory / "disease_vectors.txt", dataset.disease_vectors)
    artifacts.write_associations(directory / "associations.tsv", catalog, dataset.associations)

    precomputed: list[dict[str, str]] = []
    for sim in (*dataset.drug_sims, *dataset.disease_sims):
        filename = f"{sim.side.value}_{sim.name}.tsv"
        artifacts.write_similarity_matrix(directory / filename, sim, catalog.ids(sim.side))
        precomputed.append({"side": sim.side.value, "name": sim.name, "path": filename})

    truth_rows = [
        *(("drug", d, int(b)) for d, b in zip(catalog.drug_ids, dataset.drug_blocks, strict=True)),
        *(
            ("disease", s, int(b))
            for s, b in zip(catalog.disease_ids, dataset.disease_blocks, strict=True)
        ),
    ]
    artifacts.write_csv(directory / "blocks.tsv", ("side", "id", "block"), truth_rows, delimiter="\t")

    config: dict[str, Any] = {
        "seed": seed,
        "inputs": {
            "drugs": "drugs.txt",
            "diseases": "diseases.txt",
            "drug_vectors": "drug_vectors.txt",
            "disease_vectors": "disease_vectors.txt",
            "associations": "associations.tsv",
            "precomputed_similarities": precomputed,
            "ground_truth": "blocks.tsv",
        },
    }
    if params is not None:
        config["synth"] = params.to_dict()
    config_path = directory / "pipeline.yaml"
    artifacts.atomic_write_text(config_path, yaml.safe_dump(config, sort_keys=False))
    logger.info("Wrote synthetic dataset to %s", directory)
    return config_path
