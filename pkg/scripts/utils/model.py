"""Shared domain types for the drug/disease association pipeline.

All types are immutable after construction: arrays are copied on the way in and
marked read-only, so instances can be shared freely between workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainValidationError

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


class Side(str, Enum):
    """Which vector space an entity lives in."""

    DRUG = "drug"
    DISEASE = "disease"


def _frozen(array: np.ndarray, dtype: type = np.float64) -> np.ndarray:
    result = np.array(array, dtype=dtype, copy=True)
    result.flags.writeable = False
    return result


def _check_unique(ids: Sequence[str], what: str) -> None:
    seen: set[str] = set()
    for identifier in ids:
        if identifier in seen:
            raise DomainValidationError(f"duplicate {what} identifier: {identifier!r}")
        seen.add(identifier)


@dataclass(frozen=True)
class EntityCatalog:
    """Ordered drug and disease registries; order is the matrix index mapping."""

    drug_ids: tuple[str, ...]
    disease_ids: tuple[str, ...]
    _drug_index: dict[str, int] = field(init=False, repr=False, compare=False)
    _disease_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        """Validate uniqueness and non-emptiness, build index maps."""
        object.__setattr__(self, "drug_ids", tuple(self.drug_ids))
        object.__setattr__(self, "disease_ids", tuple(self.disease_ids))
        if not self.drug_ids:
            raise DomainValidationError("catalog needs at least one drug")
        if not self.disease_ids:
            raise DomainValidationError("catalog needs at least one disease")
        _check_unique(self.drug_ids, "drug")
        _check_unique(self.disease_ids, "disease")
        object.__setattr__(self, "_drug_index", {d: i for i, d in enumerate(self.drug_ids)})
        object.__setattr__(
            self,
            "_disease_index",
            {s: j for j, s in enumerate(self.disease_ids)},
        )

    @property
    def n_drugs(self) -> int:
        """Number of drugs (N_d)."""
        return len(self.drug_ids)

    @property
    def n_diseases(self) -> int:
        """Number of diseases (N_s)."""
        return len(self.disease_ids)

    def ids(self, side: Side) -> tuple[str, ...]:
        """Identifiers of one side in canonical order."""
        return self.drug_ids if side is Side.DRUG else self.disease_ids

    def size(self, side: Side) -> int:
        """Number of entities on one side."""
        return len(self.ids(side))

    def index_of(self, side: Side, identifier: str) -> int | None:
        """Canonical index of an identifier, or None when it is not registered."""
        index = self._drug_index if side is Side.DRUG else self._disease_index
        return index.get(identifier)

    def fingerprint(self) -> str:
        """SHA-256 of the catalog contents, used to tie saved models to a catalog."""
        digest = hashlib.sha256()
        digest.update("\n".join(self.drug_ids).encode("utf-8"))
        digest.update(b"\x00")
        digest.update("\n".join(self.disease_ids).encode("utf-8"))
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Dense vectors of a common dimension, one row per entity."""

    side: Side
    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        """Validate shape, identifier uniqueness and non-zero norms."""
        vectors = _frozen(self.vectors)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise DomainValidationError("embedding matrix must be 2-D with dim >= 1")
        if vectors.shape[0] != len(self.ids):
            raise DomainValidationError(
                f"{len(self.ids)} identifiers but {vectors.shape[0]} vectors",
            )
        if not np.all(np.isfinite(vectors)):
            raise DomainValidationError("embedding vectors must be finite")
        _check_unique(self.ids, self.side.value)
        zero = np.flatnonzero(np.linalg.norm(vectors, axis=1) == 0.0)
        if zero.size:
            raise DomainValidationError(
                f"zero-norm {self.side.value} vector for {self.ids[int(zero[0])]!r}",
            )

    @property
    def dim(self) -> int:
        """Common vector dimension N."""
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        """Number of entities."""
        return len(self.ids)

    def get(self, identifier: str) -> np.ndarray | None:
        """Vector for an identifier, or None."""
        try:
            return self.vectors[self.ids.index(identifier)]
        except ValueError:
            return None

    def select(self, ids: Iterable[str]) -> EmbeddingSet:
        """Reorder/subset to the given identifiers (all must be present)."""
        position = {identifier: i for i, identifier in enumerate(self.ids)}
        wanted = tuple(ids)
        missing = [identifier for identifier in wanted if identifier not in position]
        if missing:
            raise DomainValidationError(f"no vector for {missing[0]!r}")
        rows = [position[identifier] for identifier in wanted]
        return EmbeddingSet(self.side, wanted, self.vectors[rows])

    def with_vectors(self, vectors: np.ndarray) -> EmbeddingSet:
        """Same identifiers, new vectors."""
        return EmbeddingSet(self.side, self.ids, vectors)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric entity-by-entity similarity in [0, 1] with a definedness mask.

    Masked-out cells are stored as 0 and carry no information. The diagonal is
    forced to 1 wherever it is masked in.
    """

    side: Side
    name: str
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        """Validate symmetry and range, normalize masked cells and diagonal."""
        values = np.array(self.values, dtype=np.float64, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DomainValidationError(f"similarity {self.name!r} must be square")
        if mask.shape != values.shape:
            raise DomainValidationError(f"similarity {self.name!r} mask shape mismatch")
        if not np.array_equal(mask, mask.T):
            raise DomainValidationError(f"similarity {self.name!r} mask is not symmetric")
        values[~mask] = 0.0
        defined = values[mask]
        if not np.all(np.isfinite(defined)):
            raise DomainValidationError(f"similarity {self.name!r} has non-finite entries")
        if defined.size and (defined.min() < 0.0 or defined.max() > 1.0):
            raise DomainValidationError(f"similarity {self.name!r} has values outside [0, 1]")
        if not np.array_equal(values, values.T):
            raise DomainValidationError(f"similarity {self.name!r} is not symmetric")
        diagonal = np.diag_indices_from(values)
        values[diagonal] = np.where(mask[diagonal], 1.0, 0.0)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask, dtype=bool))

    @property
    def size(self) -> int:
        """Number of entities covered."""
        return int(self.values.shape[0])

    def get(self, i: int, j: int) -> float | None:
        """Similarity of a pair, or None when masked out."""
        return float(self.values[i, j]) if self.mask[i, j] else None

    def coverage(self) -> float:
        """Fraction of off-diagonal cells that are defined."""
        n = self.size
        if n < 2:
            return 1.0
        off = self.mask.sum() - np.trace(self.mask)
        return float(off) / (n * (n - 1))


SimilarityStack = tuple[SimilarityMatrix, ...]


@dataclass(frozen=True)
class AssociationMatrix:
    """Known drug-disease positives over catalog indices."""

    positives: frozenset[tuple[int, int]]
    n_drugs: int
    n_diseases: int

    def __post_init__(self) -> None:
        """Validate index ranges."""
        object.__setattr__(self, "positives", frozenset(self.positives))
        if self.n_drugs < 1 or self.n_diseases < 1:
            raise DomainValidationError("association dimensions must be positive")
        for i, j in self.positives:
            if not (0 <= i < self.n_drugs and 0 <= j < self.n_diseases):
                raise DomainValidationError(f"association ({i}, {j}) out of range")

    @property
    def dims(self) -> tuple[int, int]:
        """(N_d, N_s)."""
        return (self.n_drugs, self.n_diseases)

    def __len__(self) -> int:
        """Number of positive pairs."""
        return len(self.positives)

    def sorted_pairs(self) -> list[tuple[int, int]]:
        """Positives in row-major order."""
        return sorted(self.positives)

    def without(self, pairs: Iterable[tuple[int, int]]) -> AssociationMatrix:
        """Copy with the given pairs removed."""
        return AssociationMatrix(self.positives - set(pairs), self.n_drugs, self.n_diseases)

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> AssociationMatrix:
        """Sparsify a binary matrix."""
        rows, cols = np.nonzero(np.asarray(matrix))
        n_drugs, n_diseases = np.asarray(matrix).shape
        return cls(
            frozenset(zip(rows.tolist(), cols.tolist(), strict=True)),
            n_drugs,
            n_diseases,
        )


def dense_view(assoc: AssociationMatrix) -> np.ndarray:
    """Binary N_d x N_s matrix with 1 exactly at the positive pairs."""
    dense = np.zeros(assoc.dims, dtype=np.float64)
    for i, j in assoc.positives:
        dense[i, j] = 1.0
    return dense


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Low-rank bilinear projection Z = G Hᵀ with its regularization weight."""

    G: np.ndarray
    H: np.ndarray
    lam: float
    rank: int

    def __post_init__(self) -> None:
        """Validate factor shapes and rank."""
        g = _frozen(self.G)
        h = _frozen(self.H)
        if g.ndim != 2 or g.shape != h.shape:
            raise DomainValidationError("G and H must be matrices of equal shape")
        if g.shape[1] != self.rank or self.rank < 1:
            raise DomainValidationError(f"factor width {g.shape[1]} != rank {self.rank}")
        if self.rank > g.shape[0]:
            raise DomainValidationError(f"rank {self.rank} exceeds dimension {g.shape[0]}")
        if self.lam < 0:
            raise DomainValidationError("lambda must be non-negative")
        object.__setattr__(self, "G", g)
        object.__setattr__(self, "H", h)

    @property
    def dim(self) -> int:
        """Feature dimension N."""
        return int(self.G.shape[0])

    def projection(self) -> np.ndarray:
        """Z = G Hᵀ (N x N)."""
        return self.G @ self.H.T


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Dense drug-by-disease association scores."""

    values: np.ndarray

    def __post_init__(self) -> None:
        """Validate finiteness."""
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DomainValidationError("score matrix must be 2-D")
        if not np.all(np.isfinite(values)):
            raise DomainValidationError("score matrix has non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        """(N_d, N_s)."""
        return (int(self.values.shape[0]), int(self.values.shape[1]))

    def column(self, j: int) -> np.ndarray:
        """Scores of every drug for disease j."""
        return self.values[:, j]
