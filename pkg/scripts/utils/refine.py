"""Cosine-regression refinement of raw embeddings against a similarity stack.

Each entity i is refined on its own. The reference vectors y_j inside its
objective are always the raw vectors, so entities are independent and can be
refined in any order or in parallel:

    J_i(x) = sum_k sum_j (cos(x, y_j) - Sim_k(i, j))^2

summed over the defined (masked-in) cells of each similarity matrix only.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import DomainValidationError
from .model import EmbeddingSet, SimilarityMatrix

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30


@dataclass(frozen=True)
class RefineOptions:
    """Gradient-descent settings for refinement."""

    step_size: float = 0.01
    max_iters: int = 500
    rel_tol: float = 1e-8
    include_self_pairs: bool = False

    def __post_init__(self) -> None:
        """Reject non-positive settings."""
        if self.step_size <= 0 or self.max_iters < 1 or self.rel_tol <= 0:
            raise DomainValidationError("refine step_size, max_iters and rel_tol must be positive")

    @classmethod
    def from_config(cls, section: dict[str, Any]) -> RefineOptions:
        """Build from the ``refine`` config section."""
        return cls(
            step_size=float(section.get("step_size", cls.step_size)),
            max_iters=int(section.get("max_iters", cls.max_iters)),
            rel_tol=float(section.get("rel_tol", cls.rel_tol)),
            include_self_pairs=bool(section.get("include_self_pairs", cls.include_self_pairs)),
        )


@dataclass(frozen=True, eq=False)
class RefinedVector:
    """Outcome of refining one entity."""

    vector: np.ndarray
    objective_before: float
    objective_after: float
    iterations: int
    trace: tuple[float, ...]
    all_masked: bool = False


@dataclass
class RefineReport:
    """Aggregate statistics of a refine_all run."""

    entities: int = 0
    all_masked: list[str] = field(default_factory=list)
    total_iterations: int = 0
    objective_before: float = 0.0
    objective_after: float = 0.0
    mean_residual_before: float | None = None
    mean_residual_after: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert stats to dictionary."""
        return {
            "entities": self.entities,
            "all_masked": self.all_masked,
            "total_iterations": self.total_iterations,
            "objective_before": self.objective_before,
            "objective_after": self.objective_after,
            "mean_residual_before": self.mean_residual_before,
            "mean_residual_after": self.mean_residual_after,
        }


class _EntityTerms:
    """Targets and definedness of every (j, k) term for one entity."""

    def __init__(
        self,
        i: int,
        raw: EmbeddingSet,
        sims: Sequence[SimilarityMatrix],
        include_self_pairs: bool,
    ) -> None:
        n = len(raw)
        for sim in sims:
            if sim.size != n:
                raise DomainValidationError(
                    f"similarity {sim.name!r} covers {sim.size} entities, embeddings {n}",
                )
        norms = np.linalg.norm(raw.vectors, axis=1)
        self.unit_rows = raw.vectors / norms[:, None]
        if sims:
            self.targets = np.stack([sim.values[i] for sim in sims])
            self.defined = np.stack([sim.mask[i] for sim in sims])
        else:
            self.targets = np.zeros((0, n))
            self.defined = np.zeros((0, n), dtype=bool)
        if not include_self_pairs:
            self.defined[:, i] = False

    @property
    def empty(self) -> bool:
        return not self.defined.any()

    def cosines(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        norm = float(np.linalg.norm(x))
        if norm == 0.0:
            raise DomainValidationError("candidate vector has zero norm")
        return (self.unit_rows @ x) / norm, norm

    def residuals(self, cosines: np.ndarray) -> np.ndarray:
        return np.where(self.defined, cosines[None, :] - self.targets, 0.0)

    def value(self, x: np.ndarray) -> float:
        cosines, _ = self.cosines(x)
        return float(np.sum(self.residuals(cosines) ** 2))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        cosines, norm = self.cosines(x)
        weights = 2.0 * self.residuals(cosines).sum(axis=0)
        # grad cos(x, y) = y / (|x||y|) - cos(x, y) x / |x|^2
        return (self.unit_rows.T @ weights) / norm - float(weights @ cosines) * x / norm**2


def _check_candidate(candidate: np.ndarray, raw: EmbeddingSet) -> np.ndarray:
    x = np.asarray(candidate, dtype=np.float64)
    if x.shape != (raw.dim,):
        raise DomainValidationError(f"candidate has shape {x.shape}, expected ({raw.dim},)")
    return x


def objective_value(
    i: int,
    candidate: np.ndarray,
    raw: EmbeddingSet,
    sims: Sequence[SimilarityMatrix],
    include_self_pairs: bool = False,
) -> float:
    """Sum of squared cosine-vs-target residuals for entity ``i``.

    Raises:
        DomainValidationError: Zero-norm candidate or mismatched dimensions.
    """
    x = _check_candidate(candidate, raw)
    return _EntityTerms(i, raw, sims, include_self_pairs).value(x)


def objective_gradient(
    i: int,
    candidate: np.ndarray,
    raw: EmbeddingSet,
    sims: Sequence[SimilarityMatrix],
    include_self_pairs: bool = False,
) -> np.ndarray:
    """Analytic gradient of :func:`objective_value` with respect to the candidate."""
    x = _check_candidate(candidate, raw)
    return _EntityTerms(i, raw, sims, include_self_pairs).gradient(x)


def refine_vector(
    i: int,
    raw: EmbeddingSet,
    sims: Sequence[SimilarityMatrix],
    opts: RefineOptions | None = None,
) -> RefinedVector:
    """Gradient descent from the raw vector with step-halving backtracking.

    A step is accepted only when it does not increase the objective, so the
    returned objective never exceeds the starting one.

    Args:
        i: Entity index in ``raw``.
        raw: Fixed raw embeddings (also the reference vectors).
        sims: Similarity stack over the same side.
        opts: Refinement options.

    Returns:
        RefinedVector; ``all_masked`` is set when the entity has no defined term,
        in which case the raw vector is returned unchanged.
    """
    opts = opts or RefineOptions()
    if not 0 <= i < len(raw):
        raise DomainValidationError(f"entity index {i} out of range")
    start = raw.vectors[i].copy()
    terms = _EntityTerms(i, raw, sims, opts.include_self_pairs)
    if terms.empty:
        return RefinedVector(start, 0.0, 0.0, 0, (), all_masked=True)

    x = start
    current = terms.value(x)
    before = current
    trace = [current]
    iterations = 0
    while iterations < opts.max_iters:
        gradient = terms.gradient(x)
        if not np.any(gradient):
            break
        step = opts.step_size
        accepted: tuple[np.ndarray, float] | None = None
        for _ in range(MAX_HALVINGS + 1):
            candidate = x - step * gradient
            if np.any(candidate):
                value = terms.value(candidate)
                if value <= current:
                    accepted = (candidate, value)
                    break
            step /= 2.0
        if accepted is None:
            break
        x, value = accepted
        iterations += 1
        trace.append(value)
        converged = abs(current - value) <= opts.rel_tol * (1.0 + current)
        current = value
        if converged:
            break
    logger.debug("Entity %s: J %.6g -> %.6g in %d steps", raw.ids[i], before, current, iterations)
    return RefinedVector(x, before, current, iterations, tuple(trace))


def _refine_chunk(
    args: tuple[list[int], EmbeddingSet, tuple[SimilarityMatrix, ...], RefineOptions],
) -> list[RefinedVector]:
    indices, raw, sims, opts = args
    return [refine_vector(i, raw, sims, opts) for i in indices]


def mean_residual(
    vectors: EmbeddingSet,
    raw: EmbeddingSet,
    sims: Sequence[SimilarityMatrix],
    include_self_pairs: bool = False,
) -> float | None:
    """Mean |cos(x_i, y_j) - Sim_k(i, j)| over defined terms, or None if none exist."""
    unit_x = vectors.vectors / np.linalg.norm(vectors.vectors, axis=1)[:, None]
    unit_y = raw.vectors / np.linalg.norm(raw.vectors, axis=1)[:, None]
    cosines = unit_x @ unit_y.T
    total = 0.0
    count = 0
    for sim in sims:
        defined = sim.mask.copy()
        if not include_self_pairs:
            np.fill_diagonal(defined, False)
        total += float(np.abs(cosines - sim.values)[defined].sum())
        count += int(defined.sum())
    return total / count if count else None


def refine_all(
    raw: EmbeddingSet,
    sims: Sequence[SimilarityMatrix],
    opts: RefineOptions | None = None,
    workers: int = 1,
    report: RefineReport | None = None,
) -> EmbeddingSet:
    """Refine every entity independently against the fixed raw vectors.

    Args:
        raw: Raw embeddings.
        sims: Similarity stack over the same side (may be empty).
        opts: Refinement options.
        workers: Process count; the result does not depend on it.
        report: Optional stats object filled in place.

    Returns:
        The refined feature vectors, same identifiers and order as ``raw``.
    """
    opts = opts or RefineOptions()
    stack = tuple(sims)
    indices = list(range(len(raw)))
    if workers > 1 and len(indices) > 1:
        chunks = [indices[w::workers] for w in range(workers)]
        results: dict[int, RefinedVector] = {}
        with ProcessPoolExecutor(max_workers=workers) as executor:
            tasks = [(chunk, raw, stack, opts) for chunk in chunks if chunk]
            for chunk_args, refined in zip(tasks, executor.map(_refine_chunk, tasks), strict=True):
                results.update(zip(chunk_args[0], refined, strict=True))
        ordered = [results[i] for i in indices]
    else:
        ordered = [refine_vector(i, raw, stack, opts) for i in indices]

    refined = raw.with_vectors(np.stack([r.vector for r in ordered]))
    if report is not None:
        report.entities = len(ordered)
        report.all_masked = [raw.ids[i] for i, r in enumerate(ordered) if r.all_masked]
        report.total_iterations = sum(r.iterations for r in ordered)
        report.objective_before = math.fsum(r.objective_before for r in ordered)
        report.objective_after = math.fsum(r.objective_after for r in ordered)
        report.mean_residual_before = mean_residual(raw, raw, stack, opts.include_self_pairs)
        report.mean_residual_after = mean_residual(refined, raw, stack, opts.include_self_pairs)
    masked = sum(1 for r in ordered if r.all_masked)
    if masked:
        logger.warning("%d %s entities have no defined similarity; kept raw", masked, raw.side.value)
    logger.info(
        "Refined %d %s vectors (objective %.6g -> %.6g)",
        len(ordered),
        raw.side.value,
        math.fsum(r.objective_before for r in ordered),
        math.fsum(r.objective_after for r in ordered),
    )
    return refined
