"""Input parsing, concept-vector aggregation and catalog alignment.

File formats (all UTF-8, '#' starts a comment line where noted):

- vectors: first line ``count dim``, then ``token c1 ... cN`` separated by spaces
- associations: ``drug_id<TAB>disease_id`` ('#' comments)
- annotation sets: ``entity_id<TAB>token1,token2,...``
- fingerprints: ``entity_id<TAB>bitstring`` of uniform width
- sequences: FASTA with headers ``>entity_id[|tag]``; several records per entity
- precomputed similarity: header ``id<TAB>e1<TAB>e2...``, one row per entity,
  ``NA`` (or an empty cell) for undefined values
- concept map: ``disease_id<TAB>concept1,concept2,...``
- entity lists: one identifier per line ('#' comments)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import DomainValidationError, EmptyCatalogError, InputFormatError
from .model import AssociationMatrix, EmbeddingSet, EntityCatalog, Side, SimilarityMatrix

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping
    from pathlib import Path

logger = logging.getLogger(__name__)

# IUPAC amino-acid letters (covers the nucleotide letters A, C, G, T as well)
PROTEIN_ALPHABET = "ACDEFGHIKLMNPQRSTVWYBZXJUO*"
SYMMETRY_TOLERANCE = 1e-9
MISSING_CELLS = frozenset({"", "NA", "NaN", "nan"})

SetAnnotations = dict[str, frozenset[str]]
SequenceTable = dict[str, tuple[str, ...]]
ConceptMap = dict[str, tuple[str, ...]]


@dataclass(frozen=True, eq=False)
class FingerprintTable:
    """Fixed-width chemical fingerprints keyed by entity id."""

    width: int
    bits: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        """Check the uniform width invariant."""
        if self.width < 1:
            raise DomainValidationError("fingerprint width must be >= 1")
        for entity, vector in self.bits.items():
            if vector.shape != (self.width,):
                raise DomainValidationError(f"fingerprint width mismatch for {entity!r}")


@dataclass
class ConceptAggregationReport:
    """Outcome of averaging concept vectors into disease vectors."""

    diseases_total: int = 0
    diseases_resolved: int = 0
    omitted: list[str] = field(default_factory=list)
    missing_concepts: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return {
            "diseases_total": self.diseases_total,
            "diseases_resolved": self.diseases_resolved,
            "omitted": list(self.omitted),
            "missing_concepts": {k: list(v) for k, v in self.missing_concepts.items()},
        }


@dataclass
class AssociationLoadReport:
    """What happened to each association row."""

    rows_read: int = 0
    positives: int = 0
    duplicates: int = 0
    skipped_unknown: int = 0
    unknown_drugs: list[str] = field(default_factory=list)
    unknown_diseases: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return {
            "rows_read": self.rows_read,
            "positives": self.positives,
            "duplicates": self.duplicates,
            "skipped_unknown": self.skipped_unknown,
            "unknown_drugs": sorted(set(self.unknown_drugs)),
            "unknown_diseases": sorted(set(self.unknown_diseases)),
        }


@dataclass(frozen=True)
class DroppedEntity:
    """An entity removed during alignment."""

    side: Side
    entity_id: str
    reason: str


@dataclass
class AlignmentReport:
    """Every drop made by align_catalog plus coverage of the optional inputs."""

    drugs_before: int = 0
    diseases_before: int = 0
    drugs_after: int = 0
    diseases_after: int = 0
    dropped: list[DroppedEntity] = field(default_factory=list)
    coverage: dict[str, dict[str, Any]] = field(default_factory=dict)
    associations: AssociationLoadReport | None = None
    concepts: ConceptAggregationReport | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        result: dict[str, Any] = {
            "counts": {
                "drugs_before": self.drugs_before,
                "diseases_before": self.diseases_before,
                "drugs_after": self.drugs_after,
                "diseases_after": self.diseases_after,
                "dropped": len(self.dropped),
            },
            "dropped": [
                {"side": d.side.value, "id": d.entity_id, "reason": d.reason}
                for d in self.dropped
            ],
            "coverage": self.coverage,
        }
        if self.associations is not None:
            result["associations"] = self.associations.to_dict()
        if self.concepts is not None:
            result["concepts"] = self.concepts.to_dict()
        return result


def _lines(path: Path) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, stripped line) for non-blank, non-comment lines."""
    try:
        with path.open(encoding="utf-8") as f:
            for number, raw in enumerate(f, start=1):
                line = raw.rstrip("\n").rstrip("\r")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                yield number, line
    except FileNotFoundError as e:
        raise InputFormatError(path, None, "file not found") from e
    except UnicodeDecodeError as e:
        raise InputFormatError(path, None, "file is not valid UTF-8") from e


def _split_tokens(field_text: str, path: Path, number: int) -> tuple[str, ...]:
    if not field_text.strip():
        return ()
    tokens = tuple(token.strip() for token in field_text.split(","))
    if any(not token for token in tokens):
        raise InputFormatError(path, number, "empty token in comma-separated list")
    return tokens


def _two_fields(line: str, path: Path, number: int, *, allow_empty_second: bool) -> tuple[str, str]:
    parts = line.split("\t")
    if len(parts) == 1 and allow_empty_second:
        parts.append("")
    if len(parts) != 2:
        raise InputFormatError(path, number, f"expected 2 tab-separated fields, got {len(parts)}")
    first, second = parts[0].strip(), parts[1].strip()
    if not first:
        raise InputFormatError(path, number, "empty identifier")
    if not second and not allow_empty_second:
        raise InputFormatError(path, number, "empty second field")
    return first, second


def load_embeddings(path: Path, side: Side) -> EmbeddingSet:
    """Load vectors in the plain-text word-vector format.

    Args:
        path: Vector file; header ``count dim`` then ``token c1 ... cN``.
        side: Which space the vectors belong to.

    Returns:
        EmbeddingSet keyed by token, in file order.

    Raises:
        InputFormatError: Header or row arity mismatch, non-numeric component,
            duplicate token, zero-norm vector, or row count differing from the header.
    """
    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    count = dim = -1
    for number, line in _lines(path):
        parts = line.split()
        if count < 0:
            if len(parts) != 2:
                raise InputFormatError(path, number, "header must be 'count dim'")
            try:
                count, dim = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise InputFormatError(path, number, "header values must be integers") from e
            if count < 0 or dim < 1:
                raise InputFormatError(path, number, "header needs count >= 0 and dim >= 1")
            continue
        if len(parts) != dim + 1:
            raise InputFormatError(
                path,
                number,
                f"expected token plus {dim} components, got {len(parts) - 1} components",
            )
        token = parts[0]
        if token in seen:
            raise InputFormatError(path, number, f"duplicate token {token!r}")
        try:
            vector = [float(value) for value in parts[1:]]
        except ValueError as e:
            raise InputFormatError(path, number, f"non-numeric component for {token!r}") from e
        if not all(math.isfinite(value) for value in vector):
            raise InputFormatError(path, number, f"non-finite component for {token!r}")
        if not any(vector):
            raise InputFormatError(path, number, f"zero-norm vector for {token!r}")
        seen.add(token)
        tokens.append(token)
        rows.append(vector)
    if count < 0:
        raise InputFormatError(path, None, "missing 'count dim' header")
    if len(rows) != count:
        raise InputFormatError(path, None, f"header declares {count} vectors, found {len(rows)}")
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    logger.info("Loaded %d %s vectors of dim %d from %s", len(rows), side.value, dim, path)
    return EmbeddingSet(side, tuple(tokens), vectors)


def load_concept_map(path: Path) -> ConceptMap:
    """Load ``disease_id<TAB>concept1,concept2,...`` lines."""
    concepts: ConceptMap = {}
    for number, line in _lines(path):
        disease, text = _two_fields(line, path, number, allow_empty_second=False)
        if disease in concepts:
            raise InputFormatError(path, number, f"duplicate disease {disease!r}")
        tokens = _split_tokens(text, path, number)
        if len(set(tokens)) != len(tokens):
            raise InputFormatError(path, number, f"repeated concept for {disease!r}")
        concepts[disease] = tokens
    return concepts


def aggregate_concept_vectors(
    concepts: Mapping[str, tuple[str, ...]],
    raw: EmbeddingSet,
) -> tuple[EmbeddingSet, ConceptAggregationReport]:
    """Average the concept vectors of each disease.

    Diseases whose concepts are all absent from ``raw`` are omitted; concepts
    missing for otherwise resolvable diseases are listed in the report.
    """
    position = {token: i for i, token in enumerate(raw.ids)}
    report = ConceptAggregationReport(diseases_total=len(concepts))
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for disease, tokens in concepts.items():
        found = [position[token] for token in tokens if token in position]
        missing = [token for token in tokens if token not in position]
        if missing:
            report.missing_concepts[disease] = missing
        if not found:
            report.omitted.append(disease)
            continue
        mean = raw.vectors[found].mean(axis=0)
        if not np.any(mean):
            # opposite concept vectors cancelled out
            report.omitted.append(disease)
            continue
        ids.append(disease)
        rows.append(mean)
    report.diseases_resolved = len(ids)
    if report.missing_concepts:
        logger.warning(
            "Concepts without vectors for %d diseases: %s",
            len(report.missing_concepts),
            "; ".join(f"{d}: {', '.join(m)}" for d, m in report.missing_concepts.items()),
        )
    if report.omitted:
        logger.warning("Omitted %d diseases with no concept vectors", len(report.omitted))
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), raw.dim)
    return EmbeddingSet(Side.DISEASE, tuple(ids), vectors), report


def load_entity_list(path: Path) -> tuple[str, ...]:
    """Load one identifier per line, rejecting duplicates."""
    ids: list[str] = []
    seen: set[str] = set()
    for number, line in _lines(path):
        identifier = line.strip()
        if identifier in seen:
            raise InputFormatError(path, number, f"duplicate identifier {identifier!r}")
        seen.add(identifier)
        ids.append(identifier)
    return tuple(ids)


def read_association_pairs(path: Path) -> list[tuple[int, str, str]]:
    """Read ``(line, drug_id, disease_id)`` rows without resolving identifiers."""
    return [
        (number, *_two_fields(line, path, number, allow_empty_second=False))
        for number, line in _lines(path)
    ]


def catalog_ids_from_pairs(pairs: list[tuple[int, str, str]]) -> tuple[list[str], list[str]]:
    """Drug and disease identifiers in order of first appearance."""
    drugs = list(dict.fromkeys(drug for _, drug, _ in pairs))
    diseases = list(dict.fromkeys(disease for _, _, disease in pairs))
    return drugs, diseases


def load_associations(
    path: Path,
    catalog: EntityCatalog,
) -> tuple[AssociationMatrix, AssociationLoadReport]:
    """Load drug-disease positives over catalog indices.

    Unknown identifiers are skipped and counted; duplicate rows collapse.
    """
    report = AssociationLoadReport()
    positives: set[tuple[int, int]] = set()
    for _, drug, disease in read_association_pairs(path):
        report.rows_read += 1
        i = catalog.index_of(Side.DRUG, drug)
        j = catalog.index_of(Side.DISEASE, disease)
        if i is None or j is None:
            report.skipped_unknown += 1
            if i is None:
                report.unknown_drugs.append(drug)
            if j is None:
                report.unknown_diseases.append(disease)
            continue
        if (i, j) in positives:
            report.duplicates += 1
            continue
        positives.add((i, j))
    report.positives = len(positives)
    if report.skipped_unknown:
        logger.warning(
            "Skipped %d association rows referencing unknown entities",
            report.skipped_unknown,
        )
    logger.info("Loaded %d associations from %s", report.positives, path)
    return AssociationMatrix(frozenset(positives), catalog.n_drugs, catalog.n_diseases), report


def load_annotation_sets(path: Path) -> SetAnnotations:
    """Load ``entity_id<TAB>token1,token2,...``; an empty token list is allowed."""
    annotations: SetAnnotations = {}
    for number, line in _lines(path):
        entity, text = _two_fields(line, path, number, allow_empty_second=True)
        if entity in annotations:
            raise InputFormatError(path, number, f"duplicate entity {entity!r}")
        annotations[entity] = frozenset(_split_tokens(text, path, number))
    return annotations


def load_fingerprints(path: Path) -> FingerprintTable:
    """Load ``entity_id<TAB>bitstring`` rows of uniform width."""
    bits: dict[str, np.ndarray] = {}
    width = -1
    for number, line in _lines(path):
        entity, bitstring = _two_fields(line, path, number, allow_empty_second=False)
        if set(bitstring) - {"0", "1"}:
            raise InputFormatError(path, number, "fingerprint must contain only '0'/'1'")
        if width < 0:
            width = len(bitstring)
        elif len(bitstring) != width:
            raise InputFormatError(
                path,
                number,
                f"fingerprint width {len(bitstring)} differs from {width}",
            )
        if entity in bits:
            raise InputFormatError(path, number, f"duplicate entity {entity!r}")
        bits[entity] = np.frombuffer(bitstring.encode("ascii"), dtype=np.uint8) == ord("1")
    if width < 0:
        raise InputFormatError(path, None, "no fingerprints found")
    return FingerprintTable(width, bits)


def load_sequences(path: Path, alphabet: str = PROTEIN_ALPHABET) -> SequenceTable:
    """Load FASTA records grouped by entity id.

    Headers are ``>entity_id`` optionally followed by ``|tag``. Residues are
    upper-cased; identical sequences for one entity are kept once.
    """
    # residues are aligned as single bytes
    allowed = {c for c in alphabet.upper() if ord(c) < 256}
    grouped: dict[str, list[str]] = {}
    current: str | None = None
    header_line = 0
    chunks: list[str] = []

    def flush() -> None:
        if current is None:
            return
        sequence = "".join(chunks)
        if not sequence:
            raise InputFormatError(path, header_line, f"empty sequence for {current!r}")
        bad = set(sequence) - allowed
        if bad:
            raise InputFormatError(
                path,
                header_line,
                f"characters {''.join(sorted(bad))!r} outside the alphabet",
            )
        records = grouped.setdefault(current, [])
        if sequence not in records:
            records.append(sequence)

    for number, line in _lines(path):
        if line.startswith(">"):
            flush()
            current = line[1:].split("|", 1)[0].strip()
            if not current:
                raise InputFormatError(path, number, "FASTA header without entity id")
            header_line = number
            chunks = []
        elif current is None:
            raise InputFormatError(path, number, "sequence data before the first header")
        else:
            chunks.append("".join(line.split()).upper())
    flush()
    return {entity: tuple(records) for entity, records in grouped.items()}


def load_similarity_matrix(
    path: Path,
    catalog: EntityCatalog,
    side: Side,
    name: str,
) -> SimilarityMatrix:
    """Load a precomputed similarity matrix and map it onto the catalog.

    Catalog entities absent from the file are masked out. Near-symmetric input is
    symmetrized by averaging; an asymmetry above 1e-9 is an error. Values outside
    [0, 1] are rejected, not clamped.
    """
    header: list[str] | None = None
    row_ids: list[str] = []
    rows: list[list[float]] = []
    lines: list[int] = []
    for number, line in _lines(path):
        cells = [cell.strip() for cell in line.split("\t")]
        if header is None:
            header = cells[1:]
            if len(set(header)) != len(header):
                raise InputFormatError(path, number, "duplicate identifier in header")
            continue
        if len(cells) != len(header) + 1:
            raise InputFormatError(
                path,
                number,
                f"expected {len(header) + 1} cells, got {len(cells)}",
            )
        row: list[float] = []
        for cell in cells[1:]:
            if cell in MISSING_CELLS:
                row.append(math.nan)
                continue
            try:
                value = float(cell)
            except ValueError as e:
                raise InputFormatError(path, number, f"non-numeric cell {cell!r}") from e
            if not 0.0 <= value <= 1.0:
                raise InputFormatError(path, number, f"value {cell} outside [0, 1]")
            row.append(value)
        row_ids.append(cells[0])
        rows.append(row)
        lines.append(number)
    if header is None:
        raise InputFormatError(path, None, "missing header row")
    if row_ids != header:
        raise InputFormatError(path, None, "row identifiers must match the header order")

    raw = np.array(rows, dtype=np.float64).reshape(len(header), len(header))
    defined = ~np.isnan(raw)
    both = defined & defined.T
    gap = np.abs(np.where(both, raw - raw.T, 0.0))
    if gap.size and gap.max() > SYMMETRY_TOLERANCE:
        i, _ = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise InputFormatError(path, lines[i], "matrix is not symmetric")
    if np.any(defined != defined.T):
        logger.warning("%s: one-sided NA cells masked in both directions", path)
    symmetric = np.where(both, (raw + raw.T) / 2.0, 0.0)

    n = catalog.size(side)
    values = np.zeros((n, n))
    mask = np.zeros((n, n), dtype=bool)
    source = [catalog.index_of(side, identifier) for identifier in header]
    kept = [(k, index) for k, index in enumerate(source) if index is not None]
    if kept:
        file_idx = np.array([k for k, _ in kept])
        cat_idx = np.array([index for _, index in kept])
        values[np.ix_(cat_idx, cat_idx)] = symmetric[np.ix_(file_idx, file_idx)]
        mask[np.ix_(cat_idx, cat_idx)] = both[np.ix_(file_idx, file_idx)]
    covered = len(kept)
    if covered < n:
        logger.warning("%s covers %d of %d %s entities", path, covered, n, side.value)
    return SimilarityMatrix(side, name, values, mask)


def similarity_matrix_ids(path: Path) -> frozenset[str]:
    """Identifiers in the header row of a precomputed similarity file."""
    for _, line in _lines(path):
        return frozenset(cell.strip() for cell in line.split("\t")[1:])
    raise InputFormatError(path, None, "missing header row")


def load_evidence(path: Path) -> dict[str, set[str]]:
    """Load ``disease_id<TAB>drug_id`` clinical-evidence rows, grouped by disease."""
    evidence: dict[str, set[str]] = {}
    for number, line in _lines(path):
        disease, drug = _two_fields(line, path, number, allow_empty_second=False)
        evidence.setdefault(disease, set()).add(drug)
    return evidence


def load_ground_truth(path: Path) -> dict[tuple[Side, str], int]:
    """Load planted block labels written by the synthetic generator.

    Format: header ``side<TAB>id<TAB>block``, then one row per entity.
    """
    blocks: dict[tuple[Side, str], int] = {}
    header_seen = False
    for number, line in _lines(path):
        cells = [cell.strip() for cell in line.split("\t")]
        if len(cells) != 3:
            raise InputFormatError(path, number, f"expected 3 tab-separated fields, got {len(cells)}")
        if not header_seen:
            header_seen = True
            if cells == ["side", "id", "block"]:
                continue
        try:
            side = Side(cells[0])
            block = int(cells[2])
        except ValueError as e:
            raise InputFormatError(path, number, f"bad ground-truth row: {e}") from e
        blocks[(side, cells[1])] = block
    return blocks


def align_catalog(
    drug_ids: list[str] | tuple[str, ...],
    disease_ids: list[str] | tuple[str, ...],
    drug_vectors: EmbeddingSet,
    disease_vectors: EmbeddingSet,
    optional_inputs: Mapping[str, tuple[Side, set[str] | frozenset[str]]] | None = None,
) -> tuple[EntityCatalog, AlignmentReport]:
    """Drop entities without an embedding; report coverage of every other input.

    Args:
        drug_ids: Raw drug registry in the desired order.
        disease_ids: Raw disease registry in the desired order.
        drug_vectors: Drug embeddings (any order, may hold extra tokens).
        disease_vectors: Disease embeddings.
        optional_inputs: Input name -> (side, ids the input covers). Entities absent
            from an optional input are retained; their similarity entries are masked.

    Returns:
        The aligned catalog and the report of every drop.

    Raises:
        EmptyCatalogError: No entity survives on a side.
    """
    report = AlignmentReport(drugs_before=len(drug_ids), diseases_before=len(disease_ids))
    drug_known = set(drug_vectors.ids)
    disease_known = set(disease_vectors.ids)
    kept_drugs: list[str] = []
    kept_diseases: list[str] = []
    for side, ids, known, kept in (
        (Side.DRUG, drug_ids, drug_known, kept_drugs),
        (Side.DISEASE, disease_ids, disease_known, kept_diseases),
    ):
        for identifier in dict.fromkeys(ids):
            if identifier in known:
                kept.append(identifier)
            else:
                report.dropped.append(DroppedEntity(side, identifier, "no embedding vector"))
    if not kept_drugs:
        raise EmptyCatalogError(Side.DRUG.value)
    if not kept_diseases:
        raise EmptyCatalogError(Side.DISEASE.value)
    report.drugs_after = len(kept_drugs)
    report.diseases_after = len(kept_diseases)

    for name, (side, covered) in (optional_inputs or {}).items():
        kept = kept_drugs if side is Side.DRUG else kept_diseases
        missing = [identifier for identifier in kept if identifier not in covered]
        report.coverage[name] = {
            "side": side.value,
            "covered": len(kept) - len(missing),
            "masked": missing,
        }
        if missing:
            logger.info("%s: %d %s entities will be masked", name, len(missing), side.value)

    for dropped in report.dropped:
        logger.warning("Dropped %s %s: %s", dropped.side.value, dropped.entity_id, dropped.reason)
    logger.info(
        "Aligned catalog: %d drugs, %d diseases (%d dropped)",
        report.drugs_after,
        report.diseases_after,
        len(report.dropped),
    )
    return EntityCatalog(tuple(kept_drugs), tuple(kept_diseases)), report
