"""Evaluation protocol: k-fold cross-validation, AUC/ROC, top-rank hits, case studies.

AUC negatives are every pair that is unknown in the FULL association matrix;
held-out positives are never negatives. Feature refinement happens once,
before cross-validation, because similarities do not depend on associations.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import DomainValidationError, InsufficientDataError
from .imc import ImcFitReport, ImcOptions, fit_imc, rank_drugs_for_disease, score_all
from .model import AssociationMatrix, EmbeddingSet, EntityCatalog, Side, dense_view
from .refine import RefineOptions, refine_all
from .synthetic import SyntheticParams, generate_from_params

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from .model import ScoreMatrix

logger = logging.getLogger(__name__)

FOLD_STREAM = 2
DEFAULT_THRESHOLDS: tuple[int, ...] = (1, 5, 10, 20, 50)
NEGATIVE_POOL = "all drug-disease pairs unknown in the full association matrix"
ROC_CONSTRUCTION = {
    "per_fold": "each fold's held-out positives against the negative pool, scored by that fold's model",
    "pooled": "concatenation of every fold's positive and negative scores",
}

Pair = tuple[int, int]


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of the positive pairs into ``k`` folds."""

    fold_of: dict[Pair, int]
    k: int

    def pairs_in(self, fold: int) -> list[Pair]:
        """Positive pairs of one fold in row-major order."""
        return sorted(pair for pair, f in self.fold_of.items() if f == fold)

    def sizes(self) -> list[int]:
        """Number of pairs per fold."""
        counts = [0] * self.k
        for f in self.fold_of.values():
            counts[f] += 1
        return counts


def kfold_split(I: AssociationMatrix, k: int, seed: int) -> FoldAssignment:
    """Seeded uniform shuffle of the positives, then round-robin fold assignment.

    Raises:
        InsufficientDataError: Fewer positives than folds.
    """
    if k < 2:
        raise DomainValidationError("fold count must be at least 2")
    pairs = I.sorted_pairs()
    if len(pairs) < k:
        raise InsufficientDataError(f"{len(pairs)} positives cannot fill {k} folds")
    rng = np.random.default_rng([seed, FOLD_STREAM])
    order = rng.permutation(len(pairs))
    fold_of = {pairs[int(p)]: position % k for position, p in enumerate(order)}
    return FoldAssignment(fold_of, k)


def _scores_array(scores: Sequence[float] | np.ndarray, what: str) -> np.ndarray:
    array = np.asarray(scores, dtype=np.float64).ravel()
    if array.size == 0:
        raise InsufficientDataError(f"no {what} scores")
    return array


def auc(pos_scores: Sequence[float] | np.ndarray, neg_scores: Sequence[float] | np.ndarray) -> float:
    """Mann-Whitney AUC with half credit for ties."""
    pos = _scores_array(pos_scores, "positive")
    neg = np.sort(_scores_array(neg_scores, "negative"))
    below = np.searchsorted(neg, pos, side="left")
    tied = np.searchsorted(neg, pos, side="right") - below
    wins = 2 * int(below.sum()) + int(tied.sum())
    return wins / (2 * pos.size * neg.size)


def roc_points(
    pos_scores: Sequence[float] | np.ndarray,
    neg_scores: Sequence[float] | np.ndarray,
) -> list[tuple[float, float]]:
    """ROC polyline from (0, 0) to (1, 1) over distinct thresholds, descending."""
    pos = _scores_array(pos_scores, "positive")
    neg = _scores_array(neg_scores, "negative")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tp = pos.size - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg_sorted, thresholds, side="left")
    points = [(0.0, 0.0)]
    points.extend(
        (int(f) / neg.size, int(t) / pos.size) for f, t in zip(fp, tp, strict=True)
    )
    return points


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    """Area under an ROC polyline."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:], strict=False):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def top_rank_hits(
    scores: ScoreMatrix,
    train_I: AssociationMatrix,
    heldout_pairs: Sequence[Pair],
    thresholds: Sequence[int],
) -> list[int]:
    """Cumulative held-out hits per rank threshold.

    A held-out drug is ranked within its disease among the drugs that are not
    training positives for that disease; ties go to the lower drug index.
    """
    if list(thresholds) != sorted(thresholds):
        raise DomainValidationError("thresholds must be sorted ascending")
    train = dense_view(train_I)
    n_drugs = scores.shape[0]
    indices = np.arange(n_drugs)
    ranks: list[int] = []
    for d, s in heldout_pairs:
        column = scores.column(s)
        candidate = train[:, s] == 0
        candidate[d] = True
        ahead = candidate & ((column > column[d]) | ((column == column[d]) & (indices < d)))
        ranks.append(1 + int(np.count_nonzero(ahead)))
    rank_array = np.array(ranks, dtype=np.int64)
    return [int(np.count_nonzero(rank_array <= t)) for t in thresholds]


@dataclass(eq=False)
class FoldResult:
    """Outcome of one cross-validation fold."""

    fold: int
    n_train: int
    n_heldout: int
    n_negatives: int
    auc: float
    roc: list[tuple[float, float]]
    top_k: list[int]
    fit: ImcFitReport
    pos_scores: np.ndarray = field(repr=False)
    neg_scores: np.ndarray = field(repr=False)

    def to_dict(self, thresholds: Sequence[int]) -> dict[str, Any]:
        """Convert to dictionary (ROC points go to CSV, not here)."""
        return {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_heldout": self.n_heldout,
            "n_negatives": self.n_negatives,
            "auc": self.auc,
            "roc_points": len(self.roc),
            "top_k": {str(t): c for t, c in zip(thresholds, self.top_k, strict=True)},
            "imc": {
                "rank": self.fit.rank,
                "lambda_used": self.fit.lam_used,
                "sweeps": self.fit.sweeps,
                "converged": self.fit.converged,
                "stop_reason": self.fit.stop_reason,
                "cg_iterations": self.fit.cg_iterations,
            },
        }


@dataclass(eq=False)
class EvalReport:
    """Cross-validation summary; contains no wall-clock data so reruns are identical."""

    features: str
    seed: int
    k: int
    thresholds: tuple[int, ...]
    n_drugs: int
    n_diseases: int
    n_positives: int
    folds: list[FoldResult]
    mean_auc: float
    pooled_auc: float
    pooled_roc: list[tuple[float, float]]
    top_k: list[int]
    config: dict[str, Any] = field(default_factory=dict)
    comparison: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        result: dict[str, Any] = {
            "features": self.features,
            "seed": self.seed,
            "folds_k": self.k,
            "dataset": {
                "n_drugs": self.n_drugs,
                "n_diseases": self.n_diseases,
                "n_positives": self.n_positives,
            },
            "negative_pool": NEGATIVE_POOL,
            "roc_construction": ROC_CONSTRUCTION,
            "mean_auc": self.mean_auc,
            "pooled_auc": self.pooled_auc,
            "top_k": {str(t): c for t, c in zip(self.thresholds, self.top_k, strict=True)},
            "folds": [f.to_dict(self.thresholds) for f in self.folds],
        }
        if self.comparison is not None:
            result["comparison"] = self.comparison
        if self.config:
            result["config"] = self.config
        return result


def _check_no_leak(train: AssociationMatrix, heldout: Sequence[Pair]) -> None:
    dense = dense_view(train)
    for i, j in heldout:
        if dense[i, j] != 0.0:
            raise DomainValidationError(f"held-out pair ({i}, {j}) leaked into training")


def _run_fold(
    args: tuple[int, AssociationMatrix, list[Pair], EmbeddingSet, EmbeddingSet, ImcOptions, tuple[int, ...]],
) -> FoldResult:
    fold, full, heldout, D, S, opts, thresholds = args
    train = full.without(heldout)
    _check_no_leak(train, heldout)
    fit = ImcFitReport()
    model = fit_imc(train, D, S, opts, init_stream=(fold,), report=fit)
    scores = score_all(model, D, S)
    pos = np.array([scores.values[i, j] for i, j in heldout])
    neg = scores.values[dense_view(full) == 0.0]
    fold_auc = auc(pos, neg)
    logger.info("Fold %d: AUC %.4f (%d held out, %d negatives)", fold, fold_auc, len(heldout), neg.size)
    return FoldResult(
        fold=fold,
        n_train=len(train),
        n_heldout=len(heldout),
        n_negatives=int(neg.size),
        auc=fold_auc,
        roc=roc_points(pos, neg),
        top_k=top_rank_hits(scores, train, heldout, thresholds),
        fit=fit,
        pos_scores=pos,
        neg_scores=neg,
    )


def run_cv(
    I: AssociationMatrix,
    D: EmbeddingSet,
    S: EmbeddingSet,
    opts: ImcOptions,
    k: int,
    seed: int,
    thresholds: Sequence[int] = DEFAULT_THRESHOLDS,
    workers: int = 1,
    features: str = "refined",
) -> EvalReport:
    """k-fold cross-validation of the IMC model.

    Args:
        I: Full association matrix.
        D: Drug feature vectors.
        S: Disease feature vectors.
        opts: IMC settings; fold ``f`` initializes from substream ``(seed, 1, f)``.
        k: Fold count.
        seed: Fold-shuffling seed.
        thresholds: Top-rank cutoffs, ascending.
        workers: Folds fitted concurrently; results do not depend on it.
        features: Label recorded in the report.

    Returns:
        EvalReport with per-fold and pooled results.
    """
    threshold_tuple = tuple(int(t) for t in thresholds)
    if any(t < 1 for t in threshold_tuple) or list(threshold_tuple) != sorted(threshold_tuple):
        raise DomainValidationError("thresholds must be positive and ascending")
    assignment = kfold_split(I, k, seed)
    tasks = [(f, I, assignment.pairs_in(f), D, S, opts, threshold_tuple) for f in range(k)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, k)) as executor:
            folds = list(executor.map(_run_fold, tasks))
    else:
        folds = [_run_fold(task) for task in tasks]

    pooled_pos = np.concatenate([f.pos_scores for f in folds])
    pooled_neg = np.concatenate([f.neg_scores for f in folds])
    report = EvalReport(
        features=features,
        seed=seed,
        k=k,
        thresholds=threshold_tuple,
        n_drugs=I.n_drugs,
        n_diseases=I.n_diseases,
        n_positives=len(I),
        folds=folds,
        mean_auc=float(np.mean([f.auc for f in folds])),
        pooled_auc=auc(pooled_pos, pooled_neg),
        pooled_roc=roc_points(pooled_pos, pooled_neg),
        top_k=[sum(f.top_k[t] for f in folds) for t in range(len(threshold_tuple))],
    )
    logger.info(
        "%d-fold CV on %s features: mean AUC %.4f, pooled AUC %.4f",
        k,
        features,
        report.mean_auc,
        report.pooled_auc,
    )
    return report


@dataclass(frozen=True)
class FeatureComparison:
    """Raw-versus-refined cross-validation on identical folds."""

    raw: EvalReport
    refined: EvalReport

    @property
    def relative_improvement(self) -> float:
        """(refined - raw) / raw mean AUC."""
        return (self.refined.mean_auc - self.raw.mean_auc) / self.raw.mean_auc

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return {
            "raw_mean_auc": self.raw.mean_auc,
            "refined_mean_auc": self.refined.mean_auc,
            "raw_pooled_auc": self.raw.pooled_auc,
            "refined_pooled_auc": self.refined.pooled_auc,
            "relative_improvement": self.relative_improvement,
        }


def compare_feature_sets(
    I: AssociationMatrix,
    raw_D: EmbeddingSet,
    raw_S: EmbeddingSet,
    D: EmbeddingSet,
    S: EmbeddingSet,
    opts: ImcOptions,
    k: int,
    seed: int,
    thresholds: Sequence[int] = DEFAULT_THRESHOLDS,
    workers: int = 1,
) -> FeatureComparison:
    """Cross-validate raw and refined features on the same folds."""
    raw = run_cv(I, raw_D, raw_S, opts, k, seed, thresholds, workers, features="raw")
    refined = run_cv(I, D, S, opts, k, seed, thresholds, workers, features="refined")
    comparison = FeatureComparison(raw, refined)
    logger.info(
        "Refined vs raw mean AUC: %.4f vs %.4f (%+.1f%%)",
        refined.mean_auc,
        raw.mean_auc,
        100.0 * comparison.relative_improvement,
    )
    return comparison


@dataclass(frozen=True)
class CaseStudyRow:
    """One ranked drug of a case study."""

    rank: int
    drug_id: str
    score: float
    mean_score: float
    evidence: bool | None = None


@dataclass(eq=False)
class CaseStudy:
    """Leave-disease-out ranking for one disease."""

    disease_id: str
    removed: list[str]
    rows: list[CaseStudyRow]
    top_k: int
    removed_in_top_k: int
    removed_recall: float | None
    planted_in_top_k: int | None = None
    planted_recall: float | None = None
    fit: ImcFitReport = field(default_factory=ImcFitReport)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary (top-k rows only; the full ranking goes to CSV)."""
        result: dict[str, Any] = {
            "disease_id": self.disease_id,
            "removed_associations": self.removed,
            "top_k": self.top_k,
            "removed_in_top_k": self.removed_in_top_k,
            "removed_recall": self.removed_recall,
            "top": [
                {
                    "rank": row.rank,
                    "drug_id": row.drug_id,
                    "score": row.score,
                    "mean_score": row.mean_score,
                    **({"evidence": row.evidence} if row.evidence is not None else {}),
                }
                for row in self.rows[: self.top_k]
            ],
        }
        if self.planted_in_top_k is not None:
            result["planted_in_top_k"] = self.planted_in_top_k
            result["planted_recall"] = self.planted_recall
        return result


def _recall(hits: int, truth_size: int, top_k: int) -> float | None:
    denominator = min(top_k, truth_size)
    return hits / denominator if denominator else None


def leave_disease_out(
    disease_id: str,
    catalog: EntityCatalog,
    I: AssociationMatrix,
    D: EmbeddingSet,
    S: EmbeddingSet,
    opts: ImcOptions,
    top_k: int = 10,
    evidence: Mapping[str, set[str]] | None = None,
    truth: set[int] | None = None,
) -> CaseStudy:
    """Remove every association of one disease, refit, and rank all drugs for it.

    Args:
        disease_id: Disease to study.
        catalog: Aligned catalog.
        I: Full association matrix.
        D: Drug feature vectors.
        S: Disease feature vectors.
        opts: IMC settings.
        top_k: Cutoff for the recall summary.
        evidence: Optional disease id -> drug ids with clinical evidence.
        truth: Optional planted drug indices (synthetic ground truth).

    Raises:
        InsufficientDataError: Unknown disease, or nothing left to train on.
    """
    j = catalog.index_of(Side.DISEASE, disease_id)
    if j is None:
        raise InsufficientDataError(f"unknown disease {disease_id!r}")
    removed_pairs = [(i, jj) for i, jj in I.sorted_pairs() if jj == j]
    train = I.without(removed_pairs)
    fit = ImcFitReport()
    model = fit_imc(train, D, S, opts, report=fit)
    scores = score_all(model, D, S)
    mean_scores = scores.values.mean(axis=1)
    supported = evidence.get(disease_id, set()) if evidence is not None else None

    rows = [
        CaseStudyRow(
            rank=rank,
            drug_id=catalog.drug_ids[i],
            score=score,
            mean_score=float(mean_scores[i]),
            evidence=None if supported is None else catalog.drug_ids[i] in supported,
        )
        for rank, (i, score) in enumerate(rank_drugs_for_disease(scores, j), start=1)
    ]
    top = {catalog.index_of(Side.DRUG, row.drug_id) for row in rows[:top_k]}
    removed = {i for i, _ in removed_pairs}
    removed_hits = len(removed & top)
    study = CaseStudy(
        disease_id=disease_id,
        removed=[catalog.drug_ids[i] for i in sorted(removed)],
        rows=rows,
        top_k=top_k,
        removed_in_top_k=removed_hits,
        removed_recall=_recall(removed_hits, len(removed), top_k),
        fit=fit,
    )
    if truth is not None:
        study.planted_in_top_k = len(truth & top)
        study.planted_recall = _recall(study.planted_in_top_k, len(truth), top_k)
    logger.info(
        "Case study %s: %d removed, %d of them in top %d",
        disease_id,
        len(removed),
        removed_hits,
        top_k,
    )
    return study


@dataclass(frozen=True)
class DimensionPoint:
    """Mean AUC at one vector dimensionality."""

    dim: int
    mean_auc: float
    raw_mean_auc: float


def sweep_dimensions(
    dims: Sequence[int],
    params: SyntheticParams,
    refine_opts: RefineOptions,
    imc_opts: ImcOptions,
    k: int,
    seed: int,
    thresholds: Sequence[int] = DEFAULT_THRESHOLDS,
    workers: int = 1,
) -> list[DimensionPoint]:
    """Cross-validate refined and raw features on synthetic data at several dimensions."""
    points: list[DimensionPoint] = []
    for dim in dims:
        dataset = generate_from_params(
            SyntheticParams(
                n_drugs=params.n_drugs,
                n_diseases=params.n_diseases,
                dim=int(dim),
                n_blocks=params.n_blocks,
                noise=params.noise,
                assoc_density=params.assoc_density,
            ),
            seed,
        )
        drugs = refine_all(dataset.drug_vectors, dataset.drug_sims, refine_opts, workers)
        diseases = refine_all(dataset.disease_vectors, dataset.disease_sims, refine_opts, workers)
        comparison = compare_feature_sets(
            dataset.associations,
            dataset.drug_vectors,
            dataset.disease_vectors,
            drugs,
            diseases,
            imc_opts,
            k,
            seed,
            thresholds,
            workers,
        )
        points.append(DimensionPoint(int(dim), comparison.refined.mean_auc, comparison.raw.mean_auc))
        logger.info("Dimension %d: mean AUC %.4f", dim, comparison.refined.mean_auc)
    return points
