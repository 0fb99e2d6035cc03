"""Similarity kernels and similarity-matrix construction.

Drug measures: side-effect Jaccard, fingerprint Tanimoto, target-sequence
alignment. Disease measures: precomputed phenotype similarity, gene-sequence
alignment. Undefined kernel values (empty sets, all-zero fingerprints, entities
without data) are masked, never reported as 0.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainValidationError, InputFormatError
from .model import EntityCatalog, Side, SimilarityMatrix

if TYPE_CHECKING:
    from collections.abc import Collection, Mapping, Sequence
    from pathlib import Path

    from .ingest import FingerprintTable

logger = logging.getLogger(__name__)


class MeasureKind(str, Enum):
    """How a similarity matrix is computed from its source."""

    JACCARD = "jaccard"
    TANIMOTO = "tanimoto"
    SEQUENCE = "sequence"
    PRECOMPUTED = "precomputed"


@dataclass(frozen=True)
class AlignmentScoring:
    """Linear-gap local alignment scoring.

    Unlisted character pairs fall back to match/mismatch; the substitution table
    is looked up in both orders.
    """

    match: float = 3.0
    mismatch: float = -3.0
    gap: float = -2.0
    substitution: Mapping[tuple[str, str], float] | None = field(default=None, hash=False)

    def __post_init__(self) -> None:
        """Enforce positive self-alignment and penalized gaps."""
        if self.match <= 0:
            raise DomainValidationError("alignment match score must be positive")
        if self.gap >= 0:
            raise DomainValidationError("alignment gap score must be negative")

    def score(self, a: str, b: str) -> float:
        """Substitution score of one character pair."""
        if self.substitution:
            value = self.substitution.get((a, b), self.substitution.get((b, a)))
            if value is not None:
                return float(value)
        return self.match if a == b else self.mismatch

    @cached_property
    def table(self) -> np.ndarray:
        """256 x 256 byte-indexed score table."""
        codes = np.arange(256)
        table = np.where(codes[:, None] == codes[None, :], self.match, self.mismatch)
        table = table.astype(np.float64)
        for (a, b), value in (self.substitution or {}).items():
            table[ord(a), ord(b)] = value
            table[ord(b), ord(a)] = value
        return table


def load_substitution_table(path: Path) -> dict[tuple[str, str], float]:
    """Load ``charA charB score`` lines ('#' comments allowed)."""
    table: dict[tuple[str, str], float] = {}
    with path.open(encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or len(parts[0]) != 1 or len(parts[1]) != 1:
                raise InputFormatError(path, number, "expected 'charA charB score'")
            a, b = parts[0].upper(), parts[1].upper()
            if max(ord(a), ord(b)) > 255:
                raise InputFormatError(path, number, "residues must be single-byte characters")
            try:
                value = float(parts[2])
            except ValueError as e:
                raise InputFormatError(path, number, "score must be numeric") from e
            table[(a, b)] = value
    logger.info("Loaded %d substitution scores from %s", len(table), path)
    return table


def jaccard_similarity(a: Collection[str], b: Collection[str]) -> float | None:
    """|A ∩ B| / |A ∪ B|, or None when both sets are empty."""
    set_a, set_b = set(a), set(b)
    union = len(set_a | set_b)
    if union == 0:
        return None
    return len(set_a & set_b) / union


def tanimoto_similarity(a: np.ndarray, b: np.ndarray) -> float | None:
    """popcount(A AND B) / popcount(A OR B), or None when both are all-zero."""
    bits_a = np.asarray(a, dtype=bool)
    bits_b = np.asarray(b, dtype=bool)
    if bits_a.shape != bits_b.shape:
        raise DomainValidationError(
            f"fingerprint widths differ: {bits_a.size} vs {bits_b.size}",
        )
    union = int(np.count_nonzero(bits_a | bits_b))
    if union == 0:
        return None
    return int(np.count_nonzero(bits_a & bits_b)) / union


def _encode(sequence: str) -> np.ndarray:
    if not sequence:
        raise DomainValidationError("cannot align an empty sequence")
    try:
        encoded = sequence.encode("latin-1")
    except UnicodeEncodeError as e:
        raise DomainValidationError(
            f"residue {sequence[e.start]!r} is outside the single-byte alignment alphabet",
        ) from e
    return np.frombuffer(encoded, dtype=np.uint8)


def smith_waterman(a: str, b: str, scoring: AlignmentScoring | None = None) -> float:
    """Best local alignment score with a linear gap penalty.

    Each DP row is computed in two vectorized passes: diagonal/vertical moves,
    then the horizontal gap chain as a running maximum of ``H[k] - k*gap``.
    """
    scoring = scoring or AlignmentScoring()
    # canonical operand order makes the score exactly symmetric
    if b < a:
        a, b = b, a
    codes_a, codes_b = _encode(a), _encode(b)
    table = scoring.table
    gap = scoring.gap
    offsets = gap * np.arange(1, len(codes_b) + 1)
    previous = np.zeros(len(codes_b) + 1)
    best = 0.0
    for code in codes_a:
        substitution = table[code, codes_b]
        candidate = np.maximum(previous[:-1] + substitution, previous[1:] + gap)
        np.maximum(candidate, 0.0, out=candidate)
        # H[j] = max_k<=j (candidate[k] + (j-k)*gap)
        chained = np.maximum.accumulate(candidate - offsets) + offsets
        current = np.empty_like(previous)
        current[0] = 0.0
        current[1:] = chained
        best = max(best, float(chained.max()))
        previous = current
    return best


def normalized_sw(a: str, b: str, scoring: AlignmentScoring | None = None) -> float:
    """SW(a, b) / sqrt(SW(a, a) * SW(b, b)), capped at 1."""
    scoring = scoring or AlignmentScoring()
    self_a = smith_waterman(a, a, scoring)
    self_b = smith_waterman(b, b, scoring)
    if self_a <= 0 or self_b <= 0:
        raise DomainValidationError("substitution table gives a non-positive self-alignment")
    if a == b:
        return 1.0
    # a substitution table may score a cross pair above the self-score geometric mean
    return min(1.0, smith_waterman(a, b, scoring) / math.sqrt(self_a * self_b))


class _AlignmentCache:
    """Memoizes normalized scores over unordered sequence pairs."""

    def __init__(self, scoring: AlignmentScoring) -> None:
        self.scoring = scoring
        self._self: dict[str, float] = {}
        self._pairs: dict[tuple[str, str], float] = {}

    def self_score(self, sequence: str) -> float:
        if sequence not in self._self:
            self._self[sequence] = smith_waterman(sequence, sequence, self.scoring)
            if self._self[sequence] <= 0:
                raise DomainValidationError(
                    "substitution table gives a non-positive self-alignment",
                )
        return self._self[sequence]

    def normalized(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        key = (a, b) if a < b else (b, a)
        if key not in self._pairs:
            raw = smith_waterman(a, b, self.scoring)
            denominator = math.sqrt(self.self_score(a) * self.self_score(b))
            self._pairs[key] = min(1.0, raw / denominator)
        return self._pairs[key]


def setwise_mean_similarity(
    p_i: Sequence[str],
    p_j: Sequence[str],
    scoring: AlignmentScoring | None = None,
    cache: _AlignmentCache | None = None,
) -> float | None:
    """Mean normalized alignment score over all cross pairs; None if a set is empty."""
    if not p_i or not p_j:
        return None
    cache = cache or _AlignmentCache(scoring or AlignmentScoring())
    total = math.fsum(cache.normalized(x, y) for x in p_i for y in p_j)
    return total / (len(p_i) * len(p_j))


def _incidence_similarity(rows: np.ndarray, has_data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized |A ∩ B| / |A ∪ B| over binary incidence rows."""
    incidence = rows.astype(np.int64)
    intersection = incidence @ incidence.T
    counts = incidence.sum(axis=1)
    union = counts[:, None] + counts[None, :] - intersection
    defined = (union > 0) & has_data[:, None] & has_data[None, :]
    values = np.divide(
        intersection,
        union,
        out=np.zeros(union.shape, dtype=np.float64),
        where=defined,
    )
    return values, defined


def _jaccard_matrix(
    ids: tuple[str, ...],
    annotations: Mapping[str, Collection[str]],
) -> tuple[np.ndarray, np.ndarray]:
    vocabulary = sorted({token for identifier in ids for token in annotations.get(identifier, ())})
    column = {token: k for k, token in enumerate(vocabulary)}
    rows = np.zeros((len(ids), len(vocabulary)), dtype=bool)
    has_data = np.zeros(len(ids), dtype=bool)
    for i, identifier in enumerate(ids):
        if identifier in annotations:
            has_data[i] = True
            for token in annotations[identifier]:
                rows[i, column[token]] = True
    return _incidence_similarity(rows, has_data)


def _tanimoto_matrix(
    ids: tuple[str, ...],
    fingerprints: FingerprintTable,
) -> tuple[np.ndarray, np.ndarray]:
    rows = np.zeros((len(ids), fingerprints.width), dtype=bool)
    has_data = np.zeros(len(ids), dtype=bool)
    for i, identifier in enumerate(ids):
        bits = fingerprints.bits.get(identifier)
        if bits is not None:
            rows[i] = bits
            has_data[i] = True
    return _incidence_similarity(rows, has_data)


def _sequence_row(
    args: tuple[int, list[tuple[str, ...] | None], AlignmentScoring],
) -> list[float | None]:
    """Row i of the set-wise alignment matrix for columns j >= i."""
    i, sets, scoring = args
    cache = _AlignmentCache(scoring)
    p_i = sets[i]
    row: list[float | None] = []
    for p_j in sets[i:]:
        if p_i is None or p_j is None:
            row.append(None)
        else:
            row.append(setwise_mean_similarity(p_i, p_j, cache=cache))
    return row


def _sequence_matrix(
    ids: tuple[str, ...],
    sequences: Mapping[str, tuple[str, ...]],
    scoring: AlignmentScoring,
    workers: int,
) -> tuple[np.ndarray, np.ndarray]:
    sets: list[tuple[str, ...] | None] = [sequences.get(identifier) or None for identifier in ids]
    n = len(ids)
    tasks = [(i, sets, scoring) for i in range(n)]
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_sequence_row, tasks))
    else:
        rows = [_sequence_row(task) for task in tasks]
    values = np.zeros((n, n))
    mask = np.zeros((n, n), dtype=bool)
    for i, row in enumerate(rows):
        for offset, value in enumerate(row):
            if value is None:
                continue
            j = i + offset
            values[i, j] = values[j, i] = value
            mask[i, j] = mask[j, i] = True
    return values, mask


def build_similarity_matrix(
    catalog: EntityCatalog,
    side: Side,
    name: str,
    kind: MeasureKind,
    source: object,
    scoring: AlignmentScoring | None = None,
    workers: int = 1,
) -> SimilarityMatrix:
    """Build one similarity matrix over a catalog side.

    Args:
        catalog: Aligned entity catalog.
        side: Drug or disease side.
        name: Measure label.
        kind: Which kernel to apply.
        source: Annotation sets, FingerprintTable, SequenceTable, or a
            SimilarityMatrix for precomputed measures.
        scoring: Alignment scoring for sequence measures.
        workers: Process count for sequence alignment (results do not depend on it).

    Returns:
        SimilarityMatrix with entries masked where either entity lacks data or the
        kernel is undefined.
    """
    ids = catalog.ids(side)
    if kind is MeasureKind.PRECOMPUTED:
        if not isinstance(source, SimilarityMatrix) or source.size != len(ids):
            raise DomainValidationError(f"precomputed {name!r} does not match the catalog")
        if source.side is not side:
            raise DomainValidationError(f"precomputed {name!r} belongs to the other side")
        return SimilarityMatrix(side, name, source.values, source.mask)
    if kind is MeasureKind.JACCARD:
        values, mask = _jaccard_matrix(ids, source)  # type: ignore[arg-type]
    elif kind is MeasureKind.TANIMOTO:
        values, mask = _tanimoto_matrix(ids, source)  # type: ignore[arg-type]
    else:
        values, mask = _sequence_matrix(
            ids,
            source,  # type: ignore[arg-type]
            scoring or AlignmentScoring(),
            workers,
        )
    matrix = SimilarityMatrix(side, name, values, mask)
    logger.info(
        "Built %s similarity %r over %d entities (%.1f%% defined)",
        side.value,
        name,
        len(ids),
        100.0 * matrix.coverage(),
    )
    return matrix
