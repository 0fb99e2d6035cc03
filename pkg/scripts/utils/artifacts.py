"""Atomic, deterministic persistence of pipeline artifacts.

Every writer goes through :func:`atomic_write_text`: the content is written to a
temporary file in the target directory and moved into place with ``os.replace``,
so readers never see a partial file. Floats are written with ``repr`` so that
reloading reproduces the exact values.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .errors import ConfigError, DomainValidationError
from .imc import model_from_dict, model_to_dict, rank_drugs_for_disease

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from .model import (
        AssociationMatrix,
        EmbeddingSet,
        EntityCatalog,
        FactorModel,
        ScoreMatrix,
        SimilarityMatrix,
    )

logger = logging.getLogger(__name__)

MISSING = "NA"


def atomic_write_text(path: Path, text: str) -> Path:
    """Write UTF-8 text atomically (temp file in the same directory, then rename)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug("Wrote %s", path)
    return path


def format_float(value: float) -> str:
    """Shortest round-tripping representation."""
    return repr(float(value))


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    """Write indented, key-ordered-as-given JSON."""
    return atomic_write_text(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def read_json(path: Path) -> dict[str, Any]:
    """Read a JSON object."""
    try:
        with path.open(encoding="utf-8") as f:
            payload = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"missing artifact {path}; run the earlier stage first") from e
    except json.JSONDecodeError as e:
        raise DomainValidationError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise DomainValidationError(f"{path}: expected a JSON object")
    return payload


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    delimiter: str = ",",
) -> Path:
    """Write a delimited table with ``\\n`` line endings; floats use repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return atomic_write_text(path, buffer.getvalue())


def write_entity_list(path: Path, ids: Iterable[str]) -> Path:
    """One identifier per line."""
    return atomic_write_text(path, "".join(f"{identifier}\n" for identifier in ids))


def write_embeddings(path: Path, embeddings: EmbeddingSet) -> Path:
    """Word-vector text format: ``count dim`` header then ``token c1 ... cN``."""
    lines = [f"{len(embeddings)} {embeddings.dim}"]
    lines.extend(
        " ".join([identifier, *(format_float(v) for v in row)])
        for identifier, row in zip(embeddings.ids, embeddings.vectors, strict=True)
    )
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_similarity_matrix(path: Path, matrix: SimilarityMatrix, ids: Sequence[str]) -> Path:
    """Tab-separated matrix with an id header; masked cells are ``NA``."""
    if len(ids) != matrix.size:
        raise DomainValidationError(f"{len(ids)} ids for a {matrix.size}-entity matrix")
    lines = ["\t".join(["id", *ids])]
    for i, identifier in enumerate(ids):
        cells = [
            format_float(matrix.values[i, j]) if matrix.mask[i, j] else MISSING
            for j in range(matrix.size)
        ]
        lines.append("\t".join([identifier, *cells]))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_associations(path: Path, catalog: EntityCatalog, associations: AssociationMatrix) -> Path:
    """``drug_id<TAB>disease_id`` rows in row-major index order."""
    rows = [
        f"{catalog.drug_ids[i]}\t{catalog.disease_ids[j]}\n" for i, j in associations.sorted_pairs()
    ]
    return atomic_write_text(path, "".join(rows))


def write_scores(path: Path, catalog: EntityCatalog, scores: ScoreMatrix) -> Path:
    """scores.csv: per disease, drugs by descending score (ties by drug index)."""
    if scores.shape != (catalog.n_drugs, catalog.n_diseases):
        raise DomainValidationError(f"score matrix {scores.shape} does not match the catalog")
    rows = [
        (catalog.drug_ids[i], disease, score)
        for j, disease in enumerate(catalog.disease_ids)
        for i, score in rank_drugs_for_disease(scores, j)
    ]
    return write_csv(path, ("drug_id", "disease_id", "score"), rows)


def save_model(path: Path, model: FactorModel, catalog: EntityCatalog) -> Path:
    """Persist a fitted model as self-describing JSON."""
    return write_json(path, model_to_dict(model, catalog))


def load_model(path: Path, catalog: EntityCatalog | None = None) -> FactorModel:
    """Load a model; the catalog hash must match when a catalog is given."""
    return model_from_dict(read_json(path), catalog)
